#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace flowconv {

/// One named, shaped, row-major array of trainable values.
struct ParamArray {
  std::string name;
  std::vector<int> dims;
  Eigen::VectorXd values;

  Eigen::Index size() const { return values.size(); }
  bool operator==(const ParamArray& o) const {
    return name == o.name && dims == o.dims && values.size() == o.values.size() && values == o.values;
  }
};

/// Ordered collection of named arrays; insertion order is the canonical
/// order for serialization and gradient sampling.
class ParamSet {
 public:
  ParamArray& add(const std::string& name, std::vector<int> dims);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  ParamArray& at(const std::string& name);
  const ParamArray& at(const std::string& name) const;
  const ParamArray* find(const std::string& name) const;

  std::size_t count() const { return arrays_.size(); }
  Eigen::Index total_size() const;
  ParamArray& operator[](std::size_t i) { return arrays_[i]; }
  const ParamArray& operator[](std::size_t i) const { return arrays_[i]; }

  auto begin() { return arrays_.begin(); }
  auto end() { return arrays_.end(); }
  auto begin() const { return arrays_.begin(); }
  auto end() const { return arrays_.end(); }

  /// Same names and shapes, all zeros.
  ParamSet zeros_like() const;
  void set_zero();
  /// this += scale * other; shapes must match.
  void add_scaled(const ParamSet& other, double scale);
  double squared_norm() const;
  bool all_finite() const;

  bool operator==(const ParamSet& o) const { return arrays_ == o.arrays_; }

 private:
  std::vector<ParamArray> arrays_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace flowconv
