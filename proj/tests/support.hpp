#pragma once

#include <atomic>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <unistd.h>

#include "lgcav/lgcav.hpp"
#include "oracles.hpp"

namespace testutil {

inline lgcav::Matrix to_matrix(const oracle::Rows& rows) { return lgcav::Matrix::from_rows(rows); }

inline oracle::Rows to_rows(const lgcav::Matrix& m) {
  oracle::Rows out;
  for (std::size_t i = 0; i < m.rows(); ++i) out.emplace_back(m.row(i).begin(), m.row(i).end());
  return out;
}

inline std::vector<std::string> ids(std::size_t n, const std::string& prefix = "i") {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(prefix + std::to_string(i));
  return out;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("lgcav_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  std::filesystem::path path_;
};

// Code of the lgcav::Error thrown by f, nullopt if none.
template <class F>
std::optional<lgcav::Errc> error_code_of(F&& f) {
  try {
    f();
  } catch (const lgcav::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

template <class F>
std::string error_message_of(F&& f) {
  try {
    f();
  } catch (const lgcav::Error& e) {
    return e.what();
  }
  return {};
}

}  // namespace testutil
