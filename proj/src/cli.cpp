#include "pixelworld/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>

#include "CLI11.hpp"
#include "pixelworld/config.hpp"
#include "pixelworld/eval.hpp"
#include "pixelworld/oracle.hpp"
#include "pixelworld/rollout.hpp"
#include "pixelworld/train.hpp"
#include "pixelworld/util.hpp"
#include "pixelworld/world.hpp"

namespace pw {
namespace {

struct Common {
  std::string config_path, out_dir, checkpoint;
  std::string split = "eval";
  std::string seed, threads, steps;  // raw values funneled through apply_override
  std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c, bool with_overrides) {
  cmd->add_option("--config", c.config_path, "key=value config file");
  cmd->add_option("--out", c.out_dir, "output directory (default: $PW_OUT or ./out)");
  cmd->add_option("--seed", c.seed, "override config key 'seed'");
  cmd->add_option("--threads", c.threads, "override config key 'threads'");
  if (with_overrides)
    cmd->add_option("overrides", c.overrides, "additional key=value overrides");
}

TrainConfig build_config(const Common& c) {
  TrainConfig cfg = load_config(c.config_path, c.overrides);
  if (!c.seed.empty()) apply_override(cfg, "seed", c.seed);
  if (!c.threads.empty()) apply_override(cfg, "threads", c.threads);
  if (!c.steps.empty()) apply_override(cfg, "steps", c.steps);
  validate_config(cfg);
  return cfg;
}

std::string resolve_out(const Common& c) {
  if (!c.out_dir.empty()) return c.out_dir;
  if (const char* env = std::getenv("PW_OUT"); env && *env) return env;
  return "out";
}

// Creates the out-dir and echoes the effective configuration into it.
std::string prepare_out(const Common& c, const TrainConfig& cfg) {
  const std::string out = resolve_out(c);
  ensure_dir(out);
  write_text_file(out + "/effective.cfg", effective_config(cfg));
  return out;
}

void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ValidationError(what + " path is required");
  if (!std::filesystem::exists(path)) throw ValidationError("missing " + what + ": " + path);
}

std::vector<Episode> load_dataset_for(const TrainConfig& cfg) {
  require_file(cfg.dataset, "dataset");
  return load_dataset(cfg.dataset);
}

int run_gen_data(const Common& c) {
  const TrainConfig cfg = build_config(c);
  const std::string out = prepare_out(c, cfg);
  const auto eps = generate_episodes(WorldConfig::from(cfg), cfg.episodes, cfg.horizon,
                                     cfg.seed, cfg.threads);
  save_dataset(eps, out + "/dataset.pwds");
  std::printf("wrote %s/dataset.pwds (%d episodes of %d steps)\n", out.c_str(),
              static_cast<int>(eps.size()), cfg.horizon);
  return 0;
}

int run_pretrain(const Common& c) {
  const TrainConfig cfg = build_config(c);
  const std::string out = prepare_out(c, cfg);
  const auto ds = load_dataset_for(cfg);
  pretrain(cfg, ds, out);
  std::printf("wrote %s/pretrained.pwck and %s/pretrain_log.csv\n", out.c_str(), out.c_str());
  return 0;
}

int run_posttrain(const Common& c) {
  const TrainConfig cfg = build_config(c);
  require_file(c.checkpoint, "checkpoint");
  const std::string out = prepare_out(c, cfg);
  const auto ds = load_dataset_for(cfg);
  DenoiserParams init = load_checkpoint(c.checkpoint);
  bind_config(init, ModelConfig::from(cfg));
  posttrain(cfg, ds, init, out);
  std::printf("wrote %s/posttrained.pwck and %s/steps.csv\n", out.c_str(), out.c_str());
  return 0;
}

int run_eval(const Common& c) {
  const TrainConfig cfg = build_config(c);
  require_file(c.checkpoint, "checkpoint");
  if (c.split != "train" && c.split != "eval")
    throw ValidationError("--split must be 'train' or 'eval'");
  const std::string out = prepare_out(c, cfg);
  const auto ds = load_dataset_for(cfg);
  const int ntrain = train_count(cfg, static_cast<int>(ds.size()));
  DenoiserParams params = load_checkpoint(c.checkpoint);
  bind_config(params, ModelConfig::from(cfg));
  std::vector<Episode> slice;
  int offset = 0;
  if (c.split == "train") {
    slice.assign(ds.begin(), ds.begin() + ntrain);
  } else {
    slice.assign(ds.begin() + ntrain, ds.end());
    offset = ntrain;
  }
  const EvalTable table = rollout_eval(params, slice, offset, cfg);
  write_text_file(out + "/metrics.csv", table.to_csv());
  std::printf("wrote %s/metrics.csv (%d rows, %d episodes, split %s)\n", out.c_str(),
              static_cast<int>(table.rows.size()), static_cast<int>(slice.size()),
              c.split.c_str());
  return 0;
}

int run_paired(const Common& c, const std::string& a_path, const std::string& b_path) {
  const TrainConfig cfg = build_config(c);
  const std::string out = prepare_out(c, cfg);
  require_file(a_path, "metric table");
  require_file(b_path, "metric table");
  const PairedResult res = paired_compare(read_metric_csv(read_text_file(a_path)),
                                          read_metric_csv(read_text_file(b_path)));
  std::string deltas = "id,delta\n";
  for (size_t i = 0; i < res.ids.size(); ++i)
    deltas += fmt(int64_t{res.ids[i]}) + "," + fmt(res.deltas[i]) + "\n";
  write_text_file(out + "/paired_deltas.csv", deltas);
  write_text_file(out + "/paired_summary.csv",
                  "wins,losses,ties,p_two_sided,p_one_sided\n" + fmt(int64_t{res.wins}) +
                      "," + fmt(int64_t{res.losses}) + "," + fmt(int64_t{res.ties}) + "," +
                      fmt(res.p_two_sided) + "," + fmt(res.p_one_sided) + "\n");
  std::printf("wins=%d losses=%d ties=%d p_two_sided=%s p_one_sided=%s\n", res.wins,
              res.losses, res.ties, fmt(res.p_two_sided).c_str(),
              fmt(res.p_one_sided).c_str());
  return 0;
}

int run_oracle(const Common& c) {
  const TrainConfig cfg = build_config(c);
  const std::string out = prepare_out(c, cfg);
  const OracleReport rep = run_oracle_suite(cfg.seed, cfg.threads);
  write_text_file(out + "/oracle.csv", rep.to_csv());
  int failures = 0;
  for (const auto& r : rep.rows)
    if (!r.pass) ++failures;
  std::printf("oracle: %d checks, %d failures (%s/oracle.csv)\n",
              static_cast<int>(rep.rows.size()), failures, out.c_str());
  if (failures > 0) {
    std::fprintf(stderr, "error: %d oracle checks failed\n", failures);
    return 2;
  }
  return 0;
}

int run_elo(const Common& c, const std::string& votes_path) {
  const TrainConfig cfg = build_config(c);
  const std::string out = prepare_out(c, cfg);
  require_file(votes_path, "votes CSV");
  const EloState state = elo_tournament(parse_votes_csv(read_text_file(votes_path)));
  write_text_file(out + "/elo.csv", ratings_csv(state));
  std::printf("wrote %s/elo.csv (%d models)\n", out.c_str(),
              static_cast<int>(state.ratings.size()));
  return 0;
}

}  // namespace

int cli_run(std::vector<std::string> args) {
  CLI::App app{"post-training toolkit for the multi-view pixel-world diffusion model",
               "pwctl"};
  app.require_subcommand(1);

  Common gen, pre, post, ev, pa, orc, el;
  std::string paired_a, paired_b, votes_path;

  CLI::App* c_gen = app.add_subcommand("gen-data", "generate a scripted-policy dataset");
  add_common(c_gen, gen, true);

  CLI::App* c_pre = app.add_subcommand("pretrain", "teacher-forced pretraining");
  add_common(c_pre, pre, true);
  c_pre->add_option("--steps", pre.steps, "override config key 'steps'");

  CLI::App* c_post = app.add_subcommand("posttrain", "contrastive RL post-training");
  add_common(c_post, post, true);
  c_post->add_option("--steps", post.steps, "override config key 'steps'");
  c_post->add_option("--checkpoint", post.checkpoint, "pretrained checkpoint (.pwck)");

  CLI::App* c_ev = app.add_subcommand("eval", "closed-loop rollout metrics");
  add_common(c_ev, ev, true);
  c_ev->add_option("--checkpoint", ev.checkpoint, "checkpoint to evaluate (.pwck)");
  c_ev->add_option("--split", ev.split, "episode split: train|eval (default eval)");

  CLI::App* c_pa = app.add_subcommand("paired", "paired sign test of two metric tables");
  add_common(c_pa, pa, false);
  c_pa->add_option("table_a", paired_a, "metrics CSV of model A")->required();
  c_pa->add_option("table_b", paired_b, "metrics CSV of model B")->required();

  CLI::App* c_orc = app.add_subcommand("oracle", "analytic verification suite");
  add_common(c_orc, orc, true);

  CLI::App* c_el = app.add_subcommand("elo", "ELO aggregation of preference votes");
  add_common(c_el, el, false);
  c_el->add_option("votes", votes_path, "votes CSV (model_a,model_b,winner)")->required();

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (c_gen->parsed()) return run_gen_data(gen);
    if (c_pre->parsed()) return run_pretrain(pre);
    if (c_post->parsed()) return run_posttrain(post);
    if (c_ev->parsed()) return run_eval(ev);
    if (c_pa->parsed()) return run_paired(pa, paired_a, paired_b);
    if (c_orc->parsed()) return run_oracle(orc);
    if (c_el->parsed()) return run_elo(el, votes_path);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 1;
}

}  // namespace pw
