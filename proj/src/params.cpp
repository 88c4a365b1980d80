#include "flowconv/params.hpp"

#include <numeric>
#include <stdexcept>

#include "flowconv/errors.hpp"

namespace flowconv {

ParamArray& ParamSet::add(const std::string& name, std::vector<int> dims) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter name '" + name + "'");
  const Eigen::Index size = std::accumulate(dims.begin(), dims.end(), Eigen::Index{1},
                                            [](Eigen::Index a, int b) { return a * b; });
  index_[name] = arrays_.size();
  arrays_.push_back({name, std::move(dims), Eigen::VectorXd::Zero(size)});
  return arrays_.back();
}

ParamArray& ParamSet::at(const std::string& name) {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return arrays_[it->second];
}

const ParamArray& ParamSet::at(const std::string& name) const {
  const auto it = index_.find(name);
  if (it == index_.end()) throw std::out_of_range("no parameter named '" + name + "'");
  return arrays_[it->second];
}

const ParamArray* ParamSet::find(const std::string& name) const {
  const auto it = index_.find(name);
  return it == index_.end() ? nullptr : &arrays_[it->second];
}

Eigen::Index ParamSet::total_size() const {
  Eigen::Index n = 0;
  for (const auto& a : arrays_) n += a.size();
  return n;
}

ParamSet ParamSet::zeros_like() const {
  ParamSet out = *this;
  out.set_zero();
  return out;
}

void ParamSet::set_zero() {
  for (auto& a : arrays_) a.values.setZero();
}

void ParamSet::add_scaled(const ParamSet& other, double scale) {
  if (other.arrays_.size() != arrays_.size()) throw ShapeError("add_scaled: parameter sets differ");
  for (std::size_t i = 0; i < arrays_.size(); ++i) {
    if (other.arrays_[i].size() != arrays_[i].size()) throw ShapeError("add_scaled: array sizes differ");
    arrays_[i].values += scale * other.arrays_[i].values;
  }
}

double ParamSet::squared_norm() const {
  double s = 0.0;
  for (const auto& a : arrays_) s += a.values.squaredNorm();
  return s;
}

bool ParamSet::all_finite() const {
  for (const auto& a : arrays_)
    if (!a.values.allFinite()) return false;
  return true;
}

}  // namespace flowconv
