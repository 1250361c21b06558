// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The amnar Authors

#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <unistd.h>

#include "amnar/rrb.hpp"
#include "amnar/task_graph.hpp"

namespace testing_support {

// Nine actions; two branches out of 0 that rejoin nothing.
inline amnar::TaskGraph branching_example() {
  return amnar::TaskGraph(9, {{0, 1}, {1, 2}, {2, 6}, {0, 4}, {4, 5}, {5, 7}, {9, 0}});
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("amnar_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Initialised parameters with every tensor (including the zero-initialised
// output projection) shifted randomly.
inline amnar::RRBParams jittered_params(const amnar::RRBConfig& cfg, std::uint64_t seed, double sd = 0.2) {
  auto p = amnar::init_params(cfg, seed);
  std::mt19937_64 rng(seed * 31 + 5);
  std::normal_distribution<double> n(0.0, sd);
  for (auto& t : amnar::tensors(p))
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data[i] += n(rng);
  return p;
}

}  // namespace testing_support
