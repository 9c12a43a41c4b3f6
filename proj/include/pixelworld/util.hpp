#pragma once

#include <charconv>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace pw {

// Error taxonomy: ValidationError -> CLI exit 1, NumericError/IoError -> exit 2.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& m) : std::runtime_error(m) {}
};
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& m) : std::runtime_error(m) {}
};
struct IoError : std::runtime_error {
  explicit IoError(const std::string& m) : std::runtime_error(m) {}
};

// Shortest round-trip decimal form; used for every CSV cell so reruns are
// byte-identical.
std::string fmt(double v);
std::string fmt(int64_t v);

// Round a double to the nearest f32-representable value. Kept out of line: the
// SLP vectorizer in GCC 11 drops paired float round-trips when callers inline
// this into a mutate-and-return function body.
double f32_round(double v);

// Chunked parallel map over [0, n). threads <= 1 runs inline. Work items must
// be independent; any merge the caller does afterwards must use a fixed order.
void parallel_for(int64_t n, int threads, const std::function<void(int64_t)>& fn);

// --- little-endian binary file helpers (host is x86-64) ---
struct BinWriter {
  explicit BinWriter(const std::string& path);
  ~BinWriter();
  void bytes(const void* p, size_t n);
  void u8(uint8_t v) { bytes(&v, 1); }
  void u32(uint32_t v) { bytes(&v, 4); }
  void u64(uint64_t v) { bytes(&v, 8); }
  void f32(float v) { bytes(&v, 4); }
  void f64(double v) { bytes(&v, 8); }
  void str(const std::string& s);
  void f32v(const std::vector<double>& v);  // doubles narrowed to f32
  void f64v(const std::vector<double>& v);
  void u8v(const std::vector<uint8_t>& v);
  void close();

 private:
  void* f_;
  std::string path_;
};

struct BinReader {
  explicit BinReader(const std::string& path);
  ~BinReader();
  void bytes(void* p, size_t n);
  uint8_t u8();
  uint32_t u32();
  uint64_t u64();
  float f32();
  double f64();
  std::string str();
  void f32v(std::vector<double>& v, size_t n);  // widened to double
  void f64v(std::vector<double>& v, size_t n);
  void u8v(std::vector<uint8_t>& v, size_t n);

 private:
  void* f_;
  std::string path_;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);
void ensure_dir(const std::string& path);

}  // namespace pw
