#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "flgame/csv.hpp"
#include "flgame/errors.hpp"
#include "flgame/rng.hpp"

// Per-agent stochastic binary-action policies. A policy maps the shared
// observation (fatigue vector + remaining-budget ratio) to the probability
// of participating. The trainable variant is a one-hidden-layer MLP with
// tanh units; gradients are computed by hand, the network is small enough
// that nothing heavier is warranted.

namespace flgame {

// One scalar-output network. Parameters live in a single flat vector:
// [w1 (hidden x in, row-major) | b1 (hidden) | w2 (hidden) | b2].
struct Mlp {
  int input_dim = 0;
  int hidden_dim = 0;
  std::vector<double> params;

  static std::size_t param_count(int input_dim, int hidden_dim) {
    return static_cast<std::size_t>(hidden_dim) * (input_dim + 2) + 1;
  }

  static Mlp init(int input_dim, int hidden_dim, std::uint64_t seed) {
    Mlp net;
    net.input_dim = input_dim;
    net.hidden_dim = hidden_dim;
    net.params.assign(param_count(input_dim, hidden_dim), 0.0);
    const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    const auto w1_count = static_cast<std::size_t>(hidden_dim) * input_dim;
    for (std::size_t i = 0; i < w1_count; ++i)
      net.params[i] = rng::uniform_range(-s1, s1,
                                         {seed, static_cast<std::uint64_t>(rng::Stream::init), i});
    for (std::size_t i = 0; i < static_cast<std::size_t>(hidden_dim); ++i)
      net.params[w1_count + hidden_dim + i] = rng::uniform_range(
          -s2, s2, {seed, static_cast<std::uint64_t>(rng::Stream::init), w1_count + i});
    return net;
  }

  double forward(std::span<const double> x) const {
    const auto w1_count = static_cast<std::size_t>(hidden_dim) * input_dim;
    double out = params[w1_count + 2 * static_cast<std::size_t>(hidden_dim)];
    for (int i = 0; i < hidden_dim; ++i) {
      double pre = params[w1_count + i];
      const double* row = params.data() + static_cast<std::size_t>(i) * input_dim;
      for (int j = 0; j < input_dim; ++j) pre += row[j] * x[j];
      out += params[w1_count + hidden_dim + i] * std::tanh(pre);
    }
    return out;
  }

  // Accumulate d(output)/d(params) * dout into grad.
  void accumulate_grad(std::span<const double> x, double dout, std::span<double> grad) const {
    const auto w1_count = static_cast<std::size_t>(hidden_dim) * input_dim;
    for (int i = 0; i < hidden_dim; ++i) {
      double pre = params[w1_count + i];
      const double* row = params.data() + static_cast<std::size_t>(i) * input_dim;
      for (int j = 0; j < input_dim; ++j) pre += row[j] * x[j];
      const double h = std::tanh(pre);
      const double w2i = params[w1_count + hidden_dim + i];
      const double dpre = dout * w2i * (1.0 - h * h);
      double* grow = grad.data() + static_cast<std::size_t>(i) * input_dim;
      for (int j = 0; j < input_dim; ++j) grow[j] += dpre * x[j];
      grad[w1_count + i] += dpre;
      grad[w1_count + hidden_dim + i] += dout * h;
    }
    grad[w1_count + 2 * static_cast<std::size_t>(hidden_dim)] += dout;
  }
};

// Logits are clamped so the sigmoid stays strictly inside (0,1) in double
// precision.
inline double clamp_logit(double z) { return std::clamp(z, -36.0, 36.0); }

inline double sigmoid(double z) {
  z = clamp_logit(z);
  return 1.0 / (1.0 + std::exp(-z));
}

// log sigmoid(z) computed without overflow.
inline double log_sigmoid(double z) {
  z = clamp_logit(z);
  return z >= 0 ? -std::log1p(std::exp(-z)) : z - std::log1p(std::exp(z));
}

class Policy {
 public:
  virtual ~Policy() = default;
  virtual int agent_count() const = 0;
  virtual double participation_probability(int agent, std::span<const double> obs) const = 0;
};

// Fixed-probability stub used by deterministic tests and the CLI stub mode.
class ConstantPolicy final : public Policy {
 public:
  ConstantPolicy(int agents, double p) : agents_(agents), p_(p) {
    if (!(p >= 0) || p > 1) throw ConfigError("ConstantPolicy: p must be in [0,1]");
  }
  int agent_count() const override { return agents_; }
  double participation_probability(int, std::span<const double>) const override { return p_; }

 private:
  int agents_;
  double p_;
};

class MlpPolicy final : public Policy {
 public:
  MlpPolicy() = default;

  MlpPolicy(int agents, int obs_dim, int hidden, std::uint64_t seed, bool shared = false)
      : agents_(agents), obs_dim_(obs_dim), hidden_(hidden), shared_(shared) {
    const int nets = shared ? 1 : agents;
    pi_.reserve(nets);
    vf_.reserve(nets);
    for (int a = 0; a < nets; ++a) {
      pi_.push_back(Mlp::init(obs_dim, hidden, rng::mix({seed, 0x70ULL, static_cast<std::uint64_t>(a)})));
      vf_.push_back(Mlp::init(obs_dim, hidden, rng::mix({seed, 0x71ULL, static_cast<std::uint64_t>(a)})));
    }
  }

  int agent_count() const override { return agents_; }
  int observation_dim() const { return obs_dim_; }
  int hidden_dim() const { return hidden_; }
  bool shared() const { return shared_; }
  int version() const { return version_; }
  void set_version(int v) { version_ = v; }

  Mlp& pi(int agent) { return pi_[net_index(agent)]; }
  const Mlp& pi(int agent) const { return pi_[net_index(agent)]; }
  Mlp& vf(int agent) { return vf_[net_index(agent)]; }
  const Mlp& vf(int agent) const { return vf_[net_index(agent)]; }

  double participation_probability(int agent, std::span<const double> obs) const override {
    return sigmoid(pi(agent).forward(obs));
  }

  double value(int agent, std::span<const double> obs) const { return vf(agent).forward(obs); }

  void save(const std::string& path, const std::vector<std::string>& comments = {}) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("MlpPolicy::save: cannot open " + path);
    out << "flgame-policy v1\n";
    for (const auto& c : comments) out << "# " << c << '\n';
    out << "agents " << agents_ << " obs_dim " << obs_dim_ << " hidden " << hidden_
        << " shared " << (shared_ ? 1 : 0) << " version " << version_ << "\n";
    const auto dump = [&out](const char* tag, int idx, const Mlp& net) {
      out << tag << ' ' << idx;
      for (double v : net.params) out << ' ' << format_double(v);
      out << '\n';
    };
    for (std::size_t i = 0; i < pi_.size(); ++i) dump("pi", static_cast<int>(i), pi_[i]);
    for (std::size_t i = 0; i < vf_.size(); ++i) dump("vf", static_cast<int>(i), vf_[i]);
  }

  static MlpPolicy load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("MlpPolicy::load: cannot open " + path);
    std::string line;
    if (!std::getline(in, line) || line != "flgame-policy v1")
      throw ConfigError("MlpPolicy::load: bad magic in " + path);
    MlpPolicy p;
    {
      std::string k1, k2, k3, k4, k5;
      int shared_flag = 0;
      do {
        if (!std::getline(in, line)) throw ConfigError("MlpPolicy::load: truncated header");
      } while (!line.empty() && line[0] == '#');
      std::istringstream hdr(line);
      hdr >> k1 >> p.agents_ >> k2 >> p.obs_dim_ >> k3 >> p.hidden_ >> k4 >> shared_flag >> k5 >>
          p.version_;
      if (!hdr || k1 != "agents" || k2 != "obs_dim" || k3 != "hidden" || k4 != "shared" ||
          k5 != "version")
        throw ConfigError("MlpPolicy::load: bad header in " + path);
      p.shared_ = shared_flag != 0;
    }
    const int nets = p.shared_ ? 1 : p.agents_;
    p.pi_.assign(nets, Mlp{});
    p.vf_.assign(nets, Mlp{});
    const std::size_t want = Mlp::param_count(p.obs_dim_, p.hidden_);
    int seen = 0;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream row(line);
      std::string tag;
      int idx = -1;
      row >> tag >> idx;
      if ((tag != "pi" && tag != "vf") || idx < 0 || idx >= nets)
        throw ConfigError("MlpPolicy::load: bad network row in " + path);
      Mlp& net = tag == "pi" ? p.pi_[idx] : p.vf_[idx];
      net.input_dim = p.obs_dim_;
      net.hidden_dim = p.hidden_;
      net.params.clear();
      net.params.reserve(want);
      double v = 0;
      while (row >> v) net.params.push_back(v);
      if (net.params.size() != want)
        throw ConfigError("MlpPolicy::load: parameter count mismatch in " + path);
      ++seen;
    }
    if (seen != 2 * nets) throw ConfigError("MlpPolicy::load: missing networks in " + path);
    return p;
  }

 private:
  int net_index(int agent) const { return shared_ ? 0 : agent; }

  int agents_ = 0;
  int obs_dim_ = 0;
  int hidden_ = 0;
  bool shared_ = false;
  int version_ = 0;
  std::vector<Mlp> pi_;
  std::vector<Mlp> vf_;
};

}  // namespace flgame
