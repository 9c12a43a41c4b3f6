#include "pixelworld/util.hpp"

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

namespace pw {

std::string fmt(double v) {
  std::array<char, 64> buf;
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw NumericError("fmt: unrepresentable double");
  return std::string(buf.data(), end);
}

std::string fmt(int64_t v) {
  std::array<char, 32> buf;
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  (void)ec;
  return std::string(buf.data(), end);
}

double f32_round(double v) {
  // The volatile forces a real narrowing store so the conversion survives any
  // optimization level (and LTO, should it ever be enabled).
  volatile float f = static_cast<float>(v);
  return static_cast<double>(f);
}

void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& fn) {
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    for (int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  int workers = static_cast<int>(std::min<int64_t>(threads, n));
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (int64_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

// --- binary IO ---

BinWriter::BinWriter(const std::string& path) : path_(path) {
  f_ = std::fopen(path.c_str(), "wb");
  if (!f_) throw IoError("cannot open for write: " + path);
}

BinWriter::~BinWriter() {
  if (f_) std::fclose(static_cast<FILE*>(f_));
}

void BinWriter::bytes(const void* p, size_t n) {
  if (n == 0) return;
  if (std::fwrite(p, 1, n, static_cast<FILE*>(f_)) != n)
    throw IoError("short write: " + path_);
}

void BinWriter::str(const std::string& s) {
  u32(static_cast<uint32_t>(s.size()));
  bytes(s.data(), s.size());
}

void BinWriter::f32v(const std::vector<double>& v) {
  std::vector<float> tmp(v.begin(), v.end());
  bytes(tmp.data(), tmp.size() * 4);
}

void BinWriter::f64v(const std::vector<double>& v) { bytes(v.data(), v.size() * 8); }

void BinWriter::u8v(const std::vector<uint8_t>& v) { bytes(v.data(), v.size()); }

void BinWriter::close() {
  if (f_) {
    if (std::fclose(static_cast<FILE*>(f_)) != 0) throw IoError("close failed: " + path_);
    f_ = nullptr;
  }
}

BinReader::BinReader(const std::string& path) : path_(path) {
  f_ = std::fopen(path.c_str(), "rb");
  if (!f_) throw IoError("cannot open for read: " + path);
}

BinReader::~BinReader() {
  if (f_) std::fclose(static_cast<FILE*>(f_));
}

void BinReader::bytes(void* p, size_t n) {
  if (n == 0) return;
  if (std::fread(p, 1, n, static_cast<FILE*>(f_)) != n)
    throw IoError("unexpected end of file: " + path_);
}

uint8_t BinReader::u8() { uint8_t v; bytes(&v, 1); return v; }
uint32_t BinReader::u32() { uint32_t v; bytes(&v, 4); return v; }
uint64_t BinReader::u64() { uint64_t v; bytes(&v, 8); return v; }
float BinReader::f32() { float v; bytes(&v, 4); return v; }
double BinReader::f64() { double v; bytes(&v, 8); return v; }

std::string BinReader::str() {
  uint32_t n = u32();
  if (n > (1u << 20)) throw IoError("implausible string length in " + path_);
  std::string s(n, '\0');
  bytes(s.data(), n);
  return s;
}

void BinReader::f32v(std::vector<double>& v, size_t n) {
  std::vector<float> tmp(n);
  bytes(tmp.data(), n * 4);
  v.assign(tmp.begin(), tmp.end());
}

void BinReader::f64v(std::vector<double>& v, size_t n) {
  v.resize(n);
  bytes(v.data(), n * 8);
}

void BinReader::u8v(std::vector<uint8_t>& v, size_t n) {
  v.resize(n);
  bytes(v.data(), n);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for write: " + path);
  out << content;
  if (!out) throw IoError("write failed: " + path);
}

void ensure_dir(const std::string& path) {
  std::error_code ec;
  std::filesystem::create_directories(path, ec);
  if (ec) throw IoError("cannot create directory " + path + ": " + ec.message());
}

}  // namespace pw
