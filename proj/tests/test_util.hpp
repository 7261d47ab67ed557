#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <json.hpp>

#include "rnphi/repertoire.hpp"
#include "rnphi/rng.hpp"

namespace testutil {

inline nlohmann::json load_fixture(const std::string& name) {
  std::ifstream in(std::filesystem::path(RNPHI_FIXTURES) / name);
  if (!in) throw std::runtime_error("missing fixture " + name);
  return nlohmann::json::parse(in);
}

inline std::filesystem::path fixture_path(const std::string& name) { return std::filesystem::path(RNPHI_FIXTURES) / name; }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() / ("rnphi_" + tag + "_" + std::to_string(::getpid()));
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

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline rnphi::iit::Network network_from_json(const nlohmann::json& tpm) {
  std::vector<double> rows;
  int n = 0;
  for (const auto& r : tpm) {
    n = static_cast<int>(r.size());
    for (const auto& v : r) rows.push_back(v.get<double>());
  }
  return rnphi::iit::Network::from_state_by_node(n, rows);
}

inline rnphi::iit::Network random_network(rnphi::Rng& rng, int n) {
  std::vector<double> rows(static_cast<std::size_t>(n) << n);
  for (auto& v : rows) v = rng.uniform();
  return rnphi::iit::Network::from_state_by_node(n, rows);
}

/// Rows are all the same product distribution, so the next state ignores the current one.
inline rnphi::iit::Network product_network(rnphi::Rng& rng, int n) {
  std::vector<double> q(n);
  for (auto& v : q) v = 0.05 + 0.9 * rng.uniform();
  std::vector<double> rows;
  for (int s = 0; s < (1 << n); ++s)
    for (int j = 0; j < n; ++j) rows.push_back(q[j]);
  return rnphi::iit::Network::from_state_by_node(n, rows);
}

/// Each node depends only on its own previous state.
inline rnphi::iit::Network self_loop_network(rnphi::Rng& rng, int n) {
  std::vector<double> on(n), off(n);
  for (int j = 0; j < n; ++j) {
    on[j] = 0.05 + 0.9 * rng.uniform();
    off[j] = 0.05 + 0.9 * rng.uniform();
  }
  std::vector<double> rows;
  for (int s = 0; s < (1 << n); ++s)
    for (int j = 0; j < n; ++j) rows.push_back((s >> j & 1) ? on[j] : off[j]);
  return rnphi::iit::Network::from_state_by_node(n, rows);
}

/// Applies the node relabeling new_index = perm[old_index] to a network and a state.
inline rnphi::iit::Network relabel(const rnphi::iit::Network& net, const std::vector<int>& perm) {
  const int n = net.n;
  std::vector<double> rows(net.p_on.size());
  for (int s = 0; s < (1 << n); ++s) {
    unsigned t = 0;
    for (int j = 0; j < n; ++j)
      if (s >> j & 1) t |= 1u << perm[j];
    for (int j = 0; j < n; ++j) rows[t * n + perm[j]] = net.p_on[s * n + j];
  }
  return rnphi::iit::Network::from_state_by_node(n, rows);
}

inline unsigned relabel_state(unsigned s, const std::vector<int>& perm) {
  unsigned t = 0;
  for (std::size_t j = 0; j < perm.size(); ++j)
    if (s >> j & 1u) t |= 1u << perm[j];
  return t;
}

}  // namespace testutil
