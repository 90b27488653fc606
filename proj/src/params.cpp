#include "ctrkd/params.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ctrkd {

void init_uniform(Tensor& t, int64_t fan_in, std::mt19937_64& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in > 0 ? fan_in : 1));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : t.values) v = dist(rng);
}

void AdamState::apply(ParamStore& store, const AdamConfig& cfg) {
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step_));
  for (auto& [name, e] : store) {
    auto it = moments_.find(name);
    if (it == moments_.end()) {
      Moments mm;
      mm.m = Tensor(e.value.shape);
      mm.v = Tensor(e.value.shape);
      it = moments_.emplace(name, std::move(mm)).first;
    }
    require(it->second.m.same_shape(e.value),
            "AdamState: moment shape mismatch for " + name);
    double* m = it->second.m.data();
    double* v = it->second.v.data();
    double* w = e.value.data();
    double* g = e.grad.data();
    const int64_t n = e.value.numel();
    for (int64_t i = 0; i < n; ++i) {
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      w[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.epsilon);
      g[i] = 0.0;
    }
  }
}

namespace {
constexpr const char* kCheckpointTag = "ctrkd-checkpoint v1";

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace

void save_checkpoint(const ParamStore& store, const std::string& path,
                     const std::string& metadata_json) {
  std::ofstream out(path);
  require(out.good(), "save_checkpoint: cannot open " + path);
  out << kCheckpointTag << "\n";
  out << metadata_json << "\n";
  for (const auto& [name, e] : store) {
    out << name << " " << e.value.shape.size();
    for (int64_t d : e.value.shape) out << " " << d;
    for (double v : e.value.values) out << " " << fmt_double(v);
    out << "\n";
  }
  require(out.good(), "save_checkpoint: write failed for " + path);
}

std::string load_checkpoint(ParamStore& store, const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "load_checkpoint: cannot open " + path);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)) && line == kCheckpointTag,
          "load_checkpoint: bad version tag in " + path);
  std::string metadata;
  require(static_cast<bool>(std::getline(in, metadata)),
          "load_checkpoint: missing metadata line in " + path);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string name;
    size_t rank = 0;
    require(static_cast<bool>(ls >> name >> rank),
            "load_checkpoint: malformed parameter line in " + path);
    std::vector<int64_t> shape(rank);
    for (size_t i = 0; i < rank; ++i)
      require(static_cast<bool>(ls >> shape[i]),
              "load_checkpoint: truncated shape for " + name);
    Tensor& t = store.create(name, shape);
    for (double& v : t.values)
      require(static_cast<bool>(ls >> v),
              "load_checkpoint: truncated values for " + name);
    double extra;
    require(!(ls >> extra), "load_checkpoint: trailing values for " + name);
  }
  return metadata;
}

}  // namespace ctrkd
