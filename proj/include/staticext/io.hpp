#pragma once

#include <filesystem>

#include "staticext/solver.hpp"

namespace staticext {

// Deterministic manifest embedded as trailing comments in every output
// file; rerunning with identical inputs reproduces outputs byte for byte.
struct RunManifest {
  std::string command;
  std::vector<std::pair<std::string, std::string>> config;
  std::string input_digest;  // fnv1a-64 of the input file bytes
  std::string format_version = "staticext v1";

  void add(const std::string& key, const std::string& value) { config.emplace_back(key, value); }
  void add(const std::string& key, double value) { config.emplace_back(key, fmt_full(value)); }
  void add(const std::string& key, int value) {
    config.emplace_back(key, std::to_string(value));
  }
  std::string to_comments() const;
};

std::string fnv1a_digest(const std::string& bytes);
std::string read_file(const std::filesystem::path& p);

// ----------------------------------------------------------------------
// Boundary-data files: line-oriented mode coefficients of the deviation
// from round data.
//   staticext-bd v1
//   lmax <int>
//   sigma <L> <M> <even|odd> <c|d> <float>
//   h <L> <M> <float>
// '#' starts a comment; unspecified modes are zero.
// ----------------------------------------------------------------------
struct BoundaryEntry {
  bool is_sigma;  // otherwise h
  int L, M;
  bool even = true;   // sigma only
  bool c_term = false;  // sigma only: c (trace-free) vs d (trace) profile
  double value = 0;
};

struct BoundaryFile {
  int lmax = 0;
  std::vector<BoundaryEntry> entries;
};

// throws InputError with the line number on malformed input
BoundaryFile parse_boundary_file(const std::string& text);
BoundaryFile load_boundary_file(const std::filesystem::path& p);
std::string render_boundary_file(const BoundaryFile& bf);

// realize the mode data on a grid (grid lmax must be >= file lmax)
BoundaryData to_boundary_data(const Discretization& D, const BoundaryFile& bf);

// per-generator reflection deviation of boundary data; returns the worst
// (axis name, deviation)
std::pair<std::string, double> worst_reflection(const BoundaryData& bd);

// ----------------------------------------------------------------------
// Solution files: grid block plus per-mode radial profile blocks.
// ----------------------------------------------------------------------
std::string render_solution(const MetricState& state, const RunManifest& manifest);
void write_solution(const std::filesystem::path& p, const MetricState& state,
                    const RunManifest& manifest);

struct SolutionFile {
  int n_r = 0;
  int lmax = 0;
  Eigen::VectorXd nodes;
  // profile columns keyed like the in-memory spectra
  std::vector<std::tuple<int, int, bool, RadialProfile>> modes;  // (L, M, even, profiles)
  std::vector<std::tuple<int, int, Eigen::VectorXd>> lapse;      // (L, M, profile)
};
SolutionFile parse_solution(const std::string& text);

// reconstruct the state on a freshly built discretization
std::pair<std::unique_ptr<Discretization>, std::unique_ptr<MetricState>> load_solution(
    const std::filesystem::path& p);

// ----------------------------------------------------------------------
// Diagnostics log
// ----------------------------------------------------------------------
std::string render_log(const StaticSolution& sol, const RunManifest& manifest,
                       const std::vector<std::pair<std::string, double>>& timings);

}  // namespace staticext
