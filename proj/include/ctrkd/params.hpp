#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "ctrkd/tensor.hpp"

namespace ctrkd {

// Named parameters with parallel gradient buffers. std::map keeps iteration
// order stable, which the deterministic-training contract relies on.
class ParamStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
  };

  Tensor& create(const std::string& name, std::vector<int64_t> shape) {
    require(entries_.find(name) == entries_.end(),
            "ParamStore: duplicate parameter name " + name);
    Entry e;
    e.value = Tensor(shape);
    e.grad = Tensor(std::move(shape));
    auto [it, ok] = entries_.emplace(name, std::move(e));
    (void)ok;
    return it->second.value;
  }

  bool has(const std::string& name) const { return entries_.count(name) != 0; }

  Entry& entry(const std::string& name) {
    auto it = entries_.find(name);
    require(it != entries_.end(), "ParamStore: unknown parameter " + name);
    return it->second;
  }
  const Entry& entry(const std::string& name) const {
    auto it = entries_.find(name);
    require(it != entries_.end(), "ParamStore: unknown parameter " + name);
    return it->second;
  }

  Tensor& value(const std::string& name) { return entry(name).value; }
  const Tensor& value(const std::string& name) const { return entry(name).value; }
  Tensor& grad(const std::string& name) { return entry(name).grad; }

  void zero_grads() {
    for (auto& [name, e] : entries_) e.grad.zero();
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, e] : entries_) out.push_back(name);
    return out;
  }

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, Entry> entries_;
};

// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)] from the given generator.
void init_uniform(Tensor& t, int64_t fan_in, std::mt19937_64& rng);

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  int64_t step() const { return step_; }

  // Standard Adam update with bias correction; zeroes gradients afterwards.
  void apply(ParamStore& store, const AdamConfig& cfg);

 private:
  struct Moments {
    Tensor m;
    Tensor v;
  };
  std::map<std::string, Moments> moments_;
  int64_t step_ = 0;
};

// Checkpoint file: version tag, one JSON metadata line, then one line per
// parameter ("name shape v0 v1 ..." with round-trip double formatting).
void save_checkpoint(const ParamStore& store, const std::string& path,
                     const std::string& metadata_json);
// Loads values into an empty store; returns the metadata line. A file naming
// parameters that clash or repeat fails loudly.
std::string load_checkpoint(ParamStore& store, const std::string& path);

}  // namespace ctrkd
