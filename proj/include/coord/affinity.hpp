#pragma once

// Hard-constraint eligibility and the soft affinity score per
// (packet, resource) pair.
//
//   sigma = 0                                          if a mandatory attr is missing
//   sigma = (base + sum matched w(kind)) / (base + sum all w(kind))   otherwise
//
// where the sums run over the packet's optional attributes. Dummy resources
// are scored `dummy_score` in the matrix so real workers win whenever they
// are eligible.

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "coord/domain.hpp"

namespace coord {

struct AffinityConfig {
  double base_weight = 1.0;
  std::map<AttrKind, double> optional_weights;  // missing kinds weigh 1.0
  double dummy_score = 0.01;

  double weight(AttrKind k) const {
    auto it = optional_weights.find(k);
    return it == optional_weights.end() ? 1.0 : it->second;
  }

  bool valid() const {
    if (base_weight < 0 || dummy_score <= 0 || dummy_score > 1) return false;
    double total = base_weight;
    for (AttrKind k : kAllAttrKinds) {
      if (weight(k) < 0) return false;
      total += weight(k);
    }
    return total > 0;
  }
};

inline std::vector<std::string> eligible_resources(const WorkPacket& p,
                                                   const std::vector<Resource>& resources) {
  std::vector<std::string> out;
  for (const auto& r : resources)
    if (is_eligible(p, r)) out.push_back(r.id);
  return out;
}

inline double affinity_score(const WorkPacket& p, const Resource& r, const AffinityConfig& cfg) {
  if (!is_eligible(p, r)) return 0.0;
  double matched = cfg.base_weight;
  double total = cfg.base_weight;
  for (const auto& a : p.optional_attrs) {
    double w = cfg.weight(a.kind);
    total += w;
    if (r.attrs.contains(a)) matched += w;
  }
  // base 0 with only zero-weight optionals: nothing distinguishes resources
  if (total <= 0) return 1.0;
  return matched / total;
}

class AffinityMatrix {
 public:
  AffinityMatrix() = default;
  AffinityMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), v_(rows * cols, 0.0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t i, std::size_t j) const { return v_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return v_[i * cols_ + j]; }

  bool operator==(const AffinityMatrix&) const = default;

 private:
  std::size_t rows_ = 0, cols_ = 0;
  std::vector<double> v_;
};

inline AffinityMatrix build_affinity_matrix(const std::vector<WorkPacket>& packets,
                                            const std::vector<Resource>& resources,
                                            const AffinityConfig& cfg) {
  if (!cfg.valid()) throw std::invalid_argument("invalid affinity config");
  AffinityMatrix m(packets.size(), resources.size());
  for (std::size_t i = 0; i < packets.size(); ++i) {
    for (std::size_t j = 0; j < resources.size(); ++j) {
      const auto& r = resources[j];
      if (r.is_dummy)
        m(i, j) = is_eligible(packets[i], r) ? cfg.dummy_score : 0.0;
      else
        m(i, j) = affinity_score(packets[i], r, cfg);
    }
  }
  return m;
}

}  // namespace coord
