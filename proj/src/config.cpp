#include "pixelworld/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <sstream>

#include "pixelworld/util.hpp"

namespace pw {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

struct Field {
  std::function<void(TrainConfig&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
T parse_num(const std::string& key, const std::string& v);

template <>
double parse_num<double>(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ValidationError("config: key '" + key + "' expects a number, got '" + v + "'");
  }
}

template <>
int parse_num<int>(const std::string& key, const std::string& v) {
  int out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ValidationError("config: key '" + key + "' expects an integer, got '" + v + "'");
  return out;
}

template <>
uint64_t parse_num<uint64_t>(const std::string& key, const std::string& v) {
  uint64_t out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ValidationError("config: key '" + key + "' expects an unsigned integer, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw ValidationError("config: key '" + key + "' expects a boolean, got '" + v + "'");
}

const std::map<std::string, Field>& schema() {
  static const std::map<std::string, Field> s = [] {
    std::map<std::string, Field> m;
    auto num = [&m](const std::string& k, auto TrainConfig::* field) {
      using T = std::remove_reference_t<decltype(std::declval<TrainConfig>().*field)>;
      m[k] = Field{
          [k, field](TrainConfig& c, const std::string& v) { c.*field = parse_num<T>(k, v); },
          [field](const TrainConfig& c) {
            if constexpr (std::is_same_v<T, double>) return fmt(c.*field);
            else return fmt(static_cast<int64_t>(c.*field));
          }};
    };
    auto boolean = [&m](const std::string& k, bool TrainConfig::* field) {
      m[k] = Field{
          [k, field](TrainConfig& c, const std::string& v) { c.*field = parse_bool(k, v); },
          [field](const TrainConfig& c) { return std::string(c.*field ? "true" : "false"); }};
    };
    auto str = [&m](const std::string& k, std::string TrainConfig::* field) {
      m[k] = Field{[field](TrainConfig& c, const std::string& v) { c.*field = v; },
                   [field](const TrainConfig& c) { return c.*field; }};
    };

    num("seed", &TrainConfig::seed);
    num("threads", &TrainConfig::threads);
    str("dataset", &TrainConfig::dataset);
    num("episodes", &TrainConfig::episodes);
    num("horizon", &TrainConfig::horizon);
    num("objects", &TrainConfig::objects);
    num("image", &TrainConfig::image);
    num("channels", &TrainConfig::channels);
    num("views", &TrainConfig::views);
    num("H", &TrainConfig::H);
    num("L", &TrainConfig::L);
    num("action_dim", &TrainConfig::action_dim);
    num("hidden", &TrainConfig::hidden);
    num("sigma_loc", &TrainConfig::sigma_loc);
    num("sigma_scale", &TrainConfig::sigma_scale);
    num("sigma_max", &TrainConfig::sigma_max);
    num("sigma_min", &TrainConfig::sigma_min);
    num("sampler_steps", &TrainConfig::sampler_steps);
    num("lr", &TrainConfig::lr);
    num("steps", &TrainConfig::steps);
    num("batch", &TrainConfig::batch);
    str("loss_reduction", &TrainConfig::loss_reduction);
    num("checkpoint_every", &TrainConfig::checkpoint_every);
    num("beta", &TrainConfig::beta);
    num("kl_lambda", &TrainConfig::kl_lambda);
    num("group_eps", &TrainConfig::group_eps);
    num("K", &TrainConfig::K);
    num("F", &TrainConfig::F);
    num("keep_top", &TrainConfig::keep_top);
    num("keep_bottom", &TrainConfig::keep_bottom);
    str("prefix_kind", &TrainConfig::prefix_kind);
    num("prefix_fixed", &TrainConfig::prefix_fixed);
    num("prefix_lo", &TrainConfig::prefix_lo);
    num("prefix_hi", &TrainConfig::prefix_hi);
    num("ema_warm", &TrainConfig::ema_warm);
    boolean("freeze", &TrainConfig::freeze);
    boolean("policy_ema", &TrainConfig::policy_ema);
    num("policy_ema_coeff", &TrainConfig::policy_ema_coeff);
    num("w_lpips", &TrainConfig::w_lpips);
    num("w_ssim", &TrainConfig::w_ssim);
    num("w_psnr", &TrainConfig::w_psnr);
    num("psnr_cap", &TrainConfig::psnr_cap);
    num("view_w0", &TrainConfig::view_w0);
    num("view_w1", &TrainConfig::view_w1);
    num("view_w2", &TrainConfig::view_w2);
    boolean("masked_metrics", &TrainConfig::masked_metrics);
    num("eval_chunks", &TrainConfig::eval_chunks);
    num("train_episodes", &TrainConfig::train_episodes);
    return m;
  }();
  return s;
}

}  // namespace

std::map<std::string, std::string> parse_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config: line " + fmt(int64_t{lineno}) + " is not key=value: '" + line + "'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ValidationError("config: line " + fmt(int64_t{lineno}) + " has an empty key");
    kv[key] = value;
  }
  return kv;
}

void apply_override(TrainConfig& cfg, const std::string& key, const std::string& value) {
  auto it = schema().find(key);
  if (it == schema().end()) throw ValidationError("config: unknown key '" + key + "'");
  it->second.set(cfg, value);
}

void apply_config(TrainConfig& cfg, const std::map<std::string, std::string>& kv) {
  for (const auto& [k, v] : kv) apply_override(cfg, k, v);
}

TrainConfig load_config(const std::string& path_or_empty,
                        const std::vector<std::string>& overrides) {
  TrainConfig cfg;
  if (!path_or_empty.empty()) apply_config(cfg, parse_config_text(read_text_file(path_or_empty)));
  for (const auto& ov : overrides) {
    size_t eq = ov.find('=');
    if (eq == std::string::npos)
      throw ValidationError("override '" + ov + "' is not key=value");
    apply_override(cfg, ov.substr(0, eq), ov.substr(eq + 1));
  }
  validate_config(cfg);
  return cfg;
}

void validate_config(const TrainConfig& cfg) {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ValidationError("config: " + msg);
  };
  require(cfg.threads >= 1, "threads must be >= 1");
  require(cfg.episodes >= 1, "episodes must be >= 1");
  require(cfg.horizon >= 1, "horizon must be >= 1");
  require(cfg.objects >= 0, "objects must be >= 0");
  require(cfg.image >= 8, "image must be >= 8");
  require(cfg.channels == 3, "channels must be 3");
  require(cfg.views == 3, "views must be 3");
  require(cfg.H >= 1, "H must be >= 1");
  require(cfg.L >= 1, "L must be >= 1");
  require(cfg.action_dim == 7, "action_dim must be 7");
  require(cfg.hidden >= 1, "hidden must be >= 1");
  require(cfg.sigma_scale > 0, "sigma_scale must be > 0");
  require(cfg.sigma_max > cfg.sigma_min && cfg.sigma_min > 0,
          "need sigma_max > sigma_min > 0");
  require(cfg.sampler_steps >= 1, "sampler_steps must be >= 1");
  require(cfg.lr >= 0, "lr must be >= 0");
  require(cfg.steps >= 0, "steps must be >= 0");
  require(cfg.batch >= 1, "batch must be >= 1");
  require(cfg.loss_reduction == "mean" || cfg.loss_reduction == "sum",
          "loss_reduction must be mean|sum");
  require(cfg.checkpoint_every >= 1, "checkpoint_every must be >= 1");
  require(cfg.beta >= 0 && cfg.beta <= 1, "beta must be in [0, 1]");
  require(cfg.kl_lambda >= 0, "kl_lambda must be >= 0");
  require(cfg.group_eps >= 0, "group_eps must be >= 0");
  require(cfg.K >= 2, "K must be >= 2");
  require(cfg.F >= 1, "F must be >= 1");
  require(cfg.keep_top >= 0 && cfg.keep_bottom >= 0 && cfg.keep_top + cfg.keep_bottom >= 1,
          "keep_top + keep_bottom must be >= 1");
  require(cfg.keep_top + cfg.keep_bottom <= cfg.K, "keep_top + keep_bottom must be <= K");
  require(cfg.prefix_kind == "fixed" || cfg.prefix_kind == "random" ||
              cfg.prefix_kind == "curriculum",
          "prefix_kind must be fixed|random|curriculum");
  require(cfg.prefix_fixed >= 0, "prefix_fixed must be >= 0");
  require(cfg.prefix_lo >= 0 && cfg.prefix_lo <= cfg.prefix_hi,
          "need 0 <= prefix_lo <= prefix_hi");
  require(cfg.ema_warm >= 1, "ema_warm must be >= 1");
  require(cfg.policy_ema_coeff >= 0 && cfg.policy_ema_coeff < 1,
          "policy_ema_coeff must be in [0, 1)");
  require(cfg.w_lpips >= 0 && cfg.w_ssim >= 0 && cfg.w_psnr >= 0,
          "metric weights must be >= 0");
  require(cfg.w_lpips + cfg.w_ssim + cfg.w_psnr > 0, "at least one metric weight positive");
  require(cfg.psnr_cap > 0, "psnr_cap must be > 0");
  require(cfg.view_w0 >= 0 && cfg.view_w1 >= 0 && cfg.view_w2 >= 0,
          "view weights must be >= 0");
  require(cfg.view_w0 + cfg.view_w1 + cfg.view_w2 > 0, "at least one view weight positive");
  require(cfg.eval_chunks >= 1, "eval_chunks must be >= 1");
  require(cfg.train_episodes == -1 || cfg.train_episodes >= 1,
          "train_episodes must be -1 or >= 1");
}

std::string effective_config(const TrainConfig& cfg) {
  std::string out;
  for (const auto& [k, f] : schema()) {  // std::map iterates sorted
    out += k;
    out += '=';
    out += f.get(cfg);
    out += '\n';
  }
  return out;
}

}  // namespace pw
