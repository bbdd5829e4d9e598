// Copyright (c) 2026 gicd authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <unistd.h>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "gicd/error.hpp"
#include "gicd/f32le.hpp"
#include "gicd/rng.hpp"

namespace gicd {

/// Per-timestep noising rates shared by both diffusion stages. Arrays are
/// indexed by timestep with a sentinel at 0: beta[0] = 0, alpha[0] = 1,
/// alpha_bar[0] = 1, sigma[0] = 0; real steps live at t in [1, T].
struct NoiseSchedule {
  Eigen::ArrayXd beta, alpha, alpha_bar, sigma;

  int steps() const { return static_cast<int>(beta.size()) - 1; }

  void check_t(int t) const {
    require(t >= 1 && t <= steps(), "timestep ", t, " outside [1, ", steps(),
            "]");
  }

  void validate() const {
    const int T = steps();
    require(T >= 1, "schedule: empty");
    require(beta.size() == alpha.size() && beta.size() == alpha_bar.size() &&
                beta.size() == sigma.size(),
            "schedule: table lengths differ");
    for (int t = 1; t <= T; ++t) {
      require(beta[t] > 0.0 && beta[t] <= 0.999, "schedule: beta[", t,
              "] = ", beta[t], " outside (0, 0.999]");
      require(alpha[t] == 1.0 - beta[t], "schedule: alpha[", t,
              "] != 1 - beta[t]");
      require(alpha_bar[t] == alpha_bar[t - 1] * alpha[t],
              "schedule: alpha_bar[", t, "] is not the running product");
      require(alpha_bar[t] < alpha_bar[t - 1],
              "schedule: alpha_bar must be strictly decreasing");
    }
  }
};

/// Cosine noise schedule: alpha_bar(t) = f(t)/f(0) with
/// f(t) = cos^2(((t/T + s)/(1 + s)) pi/2), s = 0.008, beta clipped at 0.999
/// and the posterior variance sigma_t^2 = beta_tilde_t (beta_tilde_1 =
/// beta_1).
inline NoiseSchedule cosine_schedule(int T) {
  require(T >= 2, "cosine_schedule: need T >= 2, got ", T);
  constexpr double pi = 3.14159265358979323846;
  const double s = 0.008;
  auto f = [&](double t) {
    const double x = ((t / T + s) / (1.0 + s)) * pi / 2.0;
    return std::cos(x) * std::cos(x);
  };
  NoiseSchedule sch;
  sch.beta = Eigen::ArrayXd::Zero(T + 1);
  sch.alpha = Eigen::ArrayXd::Ones(T + 1);
  sch.alpha_bar = Eigen::ArrayXd::Ones(T + 1);
  sch.sigma = Eigen::ArrayXd::Zero(T + 1);
  const double f0 = f(0.0);
  double prev = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double cur = f(static_cast<double>(t)) / f0;
    double beta = 1.0 - cur / prev;
    if (beta > 0.999) beta = 0.999;
    sch.beta[t] = beta;
    sch.alpha[t] = 1.0 - beta;
    sch.alpha_bar[t] = sch.alpha_bar[t - 1] * sch.alpha[t];
    const double beta_tilde =
        t == 1 ? beta
               : (1.0 - sch.alpha_bar[t - 1]) / (1.0 - sch.alpha_bar[t]) * beta;
    sch.sigma[t] = std::sqrt(beta_tilde);
    prev = cur;
  }
  sch.validate();
  return sch;
}

namespace detail {
template <class A, class B>
void check_same_shape(const A& a, const B& b, const char* what) {
  require(a.size() == b.size(), what, ": shape mismatch, ", a.size(), " vs ",
          b.size());
}
}  // namespace detail

/// Forward noising: sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
template <class D1, class D2>
typename D1::PlainObject q_sample(const Eigen::ArrayBase<D1>& x0, int t,
                                  const Eigen::ArrayBase<D2>& eps,
                                  const NoiseSchedule& sch) {
  sch.check_t(t);
  detail::check_same_shape(x0, eps, "q_sample");
  const double ab = sch.alpha_bar[t];
  return std::sqrt(ab) * x0.derived() + std::sqrt(1.0 - ab) * eps.derived();
}

inline double q_sample(double x0, int t, double eps, const NoiseSchedule& sch) {
  sch.check_t(t);
  const double ab = sch.alpha_bar[t];
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

/// Algebraic inverse of q_sample given a noise estimate:
/// (x_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t).
template <class D1, class D2>
typename D1::PlainObject predict_x0(const Eigen::ArrayBase<D1>& x_t, int t,
                                    const Eigen::ArrayBase<D2>& eps_hat,
                                    const NoiseSchedule& sch) {
  sch.check_t(t);
  detail::check_same_shape(x_t, eps_hat, "predict_x0");
  const double ab = sch.alpha_bar[t];
  return (x_t.derived() - std::sqrt(1.0 - ab) * eps_hat.derived()) /
         std::sqrt(ab);
}

inline double predict_x0(double x_t, int t, double eps_hat,
                         const NoiseSchedule& sch) {
  sch.check_t(t);
  const double ab = sch.alpha_bar[t];
  return (x_t - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab);
}

/// Ancestral reverse step
///   (1/sqrt(alpha_t)) (x_t - (1-alpha_t)/sqrt(1-abar_t) eps_hat) + sigma_t z.
/// The caller supplies z; it must be zero at t = 1.
template <class D1, class D2, class D3>
typename D1::PlainObject ddpm_reverse_step(const Eigen::ArrayBase<D1>& x_t,
                                           int t,
                                           const Eigen::ArrayBase<D2>& eps_hat,
                                           const NoiseSchedule& sch,
                                           const Eigen::ArrayBase<D3>& z) {
  sch.check_t(t);
  detail::check_same_shape(x_t, eps_hat, "ddpm_reverse_step");
  detail::check_same_shape(x_t, z, "ddpm_reverse_step");
  const double a = sch.alpha[t];
  const double ab = sch.alpha_bar[t];
  return (x_t.derived() -
          ((1.0 - a) / std::sqrt(1.0 - ab)) * eps_hat.derived()) /
             std::sqrt(a) +
         sch.sigma[t] * z.derived();
}

inline double ddpm_reverse_step(double x_t, int t, double eps_hat,
                                const NoiseSchedule& sch, double z) {
  sch.check_t(t);
  const double a = sch.alpha[t];
  const double ab = sch.alpha_bar[t];
  return (x_t - ((1.0 - a) / std::sqrt(1.0 - ab)) * eps_hat) / std::sqrt(a) +
         sch.sigma[t] * z;
}

inline double ddim_sigma(const NoiseSchedule& sch, int t, int t_prev,
                         double eta) {
  const double ab = sch.alpha_bar[t];
  const double abp = sch.alpha_bar[t_prev];
  return eta * std::sqrt((1.0 - abp) / (1.0 - ab)) *
         std::sqrt(1.0 - ab / abp);
}

/// DDIM transition from t to any earlier t_prev (0 allowed):
///   x_prev = sqrt(abar') x0_hat + sqrt(1 - abar' - s^2) eps_hat + s z
/// with s the eta-scaled transition noise; eta = 0 is deterministic and z is
/// only consumed when eta > 0.
template <class D1, class D2>
typename D1::PlainObject ddim_step(
    const Eigen::ArrayBase<D1>& x_t, int t, int t_prev,
    const Eigen::ArrayBase<D2>& eps_hat, const NoiseSchedule& sch, double eta,
    const typename D1::PlainObject* z = nullptr) {
  sch.check_t(t);
  require(t_prev >= 0 && t_prev < t, "ddim_step: need 0 <= t_prev < t, got ",
          t_prev, " >= ", t);
  require(eta >= 0.0 && eta <= 1.0, "ddim_step: eta must be in [0,1]");
  detail::check_same_shape(x_t, eps_hat, "ddim_step");
  const double abp = sch.alpha_bar[t_prev];
  const double sig = ddim_sigma(sch, t, t_prev, eta);
  typename D1::PlainObject x0 = predict_x0(x_t, t, eps_hat, sch);
  typename D1::PlainObject out =
      std::sqrt(abp) * x0 +
      std::sqrt(std::max(0.0, 1.0 - abp - sig * sig)) * eps_hat.derived();
  if (eta > 0.0) {
    require(z != nullptr, "ddim_step: eta > 0 needs transition noise");
    detail::check_same_shape(x_t, *z, "ddim_step");
    out += sig * *z;
  }
  return out;
}

inline double ddim_step(double x_t, int t, int t_prev, double eps_hat,
                        const NoiseSchedule& sch, double eta, double z = 0.0) {
  sch.check_t(t);
  require(t_prev >= 0 && t_prev < t, "ddim_step: need 0 <= t_prev < t");
  const double abp = sch.alpha_bar[t_prev];
  const double sig = ddim_sigma(sch, t, t_prev, eta);
  const double x0 = predict_x0(x_t, t, eps_hat, sch);
  return std::sqrt(abp) * x0 +
         std::sqrt(std::max(0.0, 1.0 - abp - sig * sig)) * eps_hat + sig * z;
}

/// n uniformly strided timesteps descending from T; the sampler finishes
/// with a hop from the last entry to 0.
inline std::vector<int> timestep_subsequence(int T, int n_steps) {
  require(n_steps >= 1 && n_steps <= T, "timestep_subsequence: need 1 <= ",
          "n_steps <= T, got n_steps=", n_steps, " T=", T);
  std::vector<int> ts(n_steps);
  for (int i = 0; i < n_steps; ++i)
    ts[i] = T - static_cast<int>((static_cast<long>(i) * T) / n_steps);
  return ts;
}

template <class D1, class D2>
double noise_mse_loss(const Eigen::ArrayBase<D1>& eps_true,
                      const Eigen::ArrayBase<D2>& eps_hat) {
  detail::check_same_shape(eps_true, eps_hat, "noise_mse_loss");
  return (eps_true.derived() - eps_hat.derived()).square().mean();
}

// ---------------------------------------------------------------------------
// Denoisers

/// Noise prediction plus the optional variance channel a plugin may return.
struct DenoiserOutput {
  Eigen::ArrayXd eps;
  std::optional<Eigen::ArrayXd> var;
};

/// Knows the clean signal; eps = (x_t - sqrt(abar) ref) / sqrt(1 - abar)
/// makes every predict_x0 exact.
struct OracleDenoiser {
  Eigen::ArrayXd reference;
};

/// Closed-form posterior-mean denoiser for an elementwise Gaussian prior
/// N(mean, diag var); mean/var of size 1 broadcast.
struct GaussianPosteriorDenoiser {
  Eigen::ArrayXd mean;
  Eigen::ArrayXd var;
};

/// Subprocess plugin. Per call the host writes request.json, x.f32 and
/// cond.f32 (raw little-endian f32) into a fresh temp directory, runs
/// `command <dir>` from `workdir`, and reads back eps.f32 (+ optional
/// var.f32).
struct ExternalDenoiser {
  std::string command;
  std::string workdir = ".";
};

using Denoiser =
    std::variant<OracleDenoiser, GaussianPosteriorDenoiser, ExternalDenoiser>;

namespace detail {

inline std::filesystem::path fresh_temp_dir() {
  static std::atomic<std::uint64_t> counter{0};
  const auto base = std::filesystem::temp_directory_path();
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const auto dir =
        base / ("gicd-denoise-" +
                std::to_string(mix64(counter++ ^
                                     static_cast<std::uint64_t>(::getpid()))));
    std::error_code ec;
    if (std::filesystem::create_directory(dir, ec)) return dir;
  }
  fail("could not create a temp directory under ", base.string());
}

inline DenoiserOutput run_external(const ExternalDenoiser& d,
                                   const Eigen::ArrayXd& x_t, int t,
                                   const Eigen::ArrayXd& cond,
                                   const std::vector<long>& shape,
                                   double alpha_bar_t) {
  namespace fs = std::filesystem;
  const fs::path dir = fresh_temp_dir();
  struct Cleanup {
    fs::path dir;
    ~Cleanup() {
      std::error_code ec;
      fs::remove_all(dir, ec);
    }
  } cleanup{dir};

  const std::string x_path = (dir / "x.f32").string();
  const std::string cond_path = (dir / "cond.f32").string();
  write_f32le(x_path, x_t.cast<float>());
  write_f32le(cond_path, cond.cast<float>());
  nlohmann::json req{{"t", t},
                     {"alpha_bar_t", alpha_bar_t},
                     {"shape", shape},
                     {"dtype", "f32le"},
                     {"x_path", x_path},
                     {"cond_path", cond_path}};
  {
    std::ofstream os(dir / "request.json");
    os << req.dump() << "\n";
  }

  const std::string cmd = "cd '" + d.workdir + "' && " + d.command + " '" +
                          dir.string() + "' 2>&1";
  std::string output;
  std::FILE* pipe = ::popen(cmd.c_str(), "r");
  require(pipe != nullptr, "external denoiser: cannot launch '", d.command,
          "'");
  char buf[512];
  while (std::fgets(buf, sizeof(buf), pipe) != nullptr) output += buf;
  const int status = ::pclose(pipe);
  require(status == 0, "external denoiser '", d.command, "' failed (status ",
          status, "): ", output);

  const fs::path eps_path = dir / "eps.f32";
  require(fs::exists(eps_path), "external denoiser '", d.command,
          "' produced no eps.f32: ", output);
  DenoiserOutput out;
  out.eps = read_f32le(eps_path.string(), x_t.size()).cast<double>();
  require(out.eps.isFinite().all(),
          "external denoiser returned non-finite noise");
  const fs::path var_path = dir / "var.f32";
  if (fs::exists(var_path)) {
    out.var = read_f32le(var_path.string(), x_t.size()).cast<double>();
    require(out.var->isFinite().all(),
            "external denoiser returned non-finite variance");
  }
  return out;
}

}  // namespace detail

/// Evaluates a denoiser on (x_t, t, condition). The shape vector describes
/// x_t's layout for the plugin protocol; in-process denoisers ignore it.
inline DenoiserOutput denoise(const Denoiser& den, const Eigen::ArrayXd& x_t,
                              int t, const Eigen::ArrayXd& cond,
                              const std::vector<long>& shape,
                              const NoiseSchedule& sch) {
  sch.check_t(t);
  if (const auto* o = std::get_if<OracleDenoiser>(&den)) {
    detail::check_same_shape(x_t, o->reference, "oracle denoiser");
    const double ab = sch.alpha_bar[t];
    DenoiserOutput out;
    out.eps = (x_t - std::sqrt(ab) * o->reference) / std::sqrt(1.0 - ab);
    return out;
  }
  if (const auto* gp = std::get_if<GaussianPosteriorDenoiser>(&den)) {
    const double ab = sch.alpha_bar[t];
    const double sab = std::sqrt(ab);
    auto broadcast = [&](const Eigen::ArrayXd& a) -> Eigen::ArrayXd {
      if (a.size() == x_t.size()) return a;
      require(a.size() == 1, "gaussian denoiser: parameter size ", a.size(),
              " does not match signal size ", x_t.size());
      return Eigen::ArrayXd::Constant(x_t.size(), a[0]);
    };
    const Eigen::ArrayXd mean = broadcast(gp->mean);
    const Eigen::ArrayXd var = broadcast(gp->var);
    const Eigen::ArrayXd e_x0 =
        (sab * var * x_t + (1.0 - ab) * mean) / (ab * var + (1.0 - ab));
    DenoiserOutput out;
    out.eps = (x_t - sab * e_x0) / std::sqrt(1.0 - ab);
    return out;
  }
  const auto& ext = std::get<ExternalDenoiser>(den);
  return detail::run_external(ext, x_t, t, cond, shape, sch.alpha_bar[t]);
}

/// Reverse diffusion from pure Gaussian noise along a uniform timestep
/// subsequence, conditioned on `cond`. All draws come from the counter RNG,
/// so a fixed seed reproduces the chain bit for bit.
inline Eigen::ArrayXd sample(const Denoiser& den, const Eigen::ArrayXd& cond,
                             const std::vector<long>& shape,
                             const NoiseSchedule& sch, int n_steps, double eta,
                             std::uint64_t seed) {
  long numel = 1;
  for (long d : shape) numel *= d;
  require(numel > 0, "sample: empty shape");
  const CounterRng rng(seed);
  Eigen::ArrayXd x = rng.normals(0, numel);
  const std::vector<int> ts = timestep_subsequence(sch.steps(), n_steps);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i];
    const int t_prev = i + 1 < ts.size() ? ts[i + 1] : 0;
    const DenoiserOutput den_out = denoise(den, x, t, cond, shape, sch);
    require(den_out.eps.isFinite().all(), "sample: denoiser returned",
            " non-finite noise at t = ", t);
    if (eta > 0.0 && t_prev > 0) {
      const Eigen::ArrayXd z = rng.normals(1 + i, numel);
      x = ddim_step(x, t, t_prev, den_out.eps, sch, eta, &z);
    } else {
      x = ddim_step(x, t, t_prev, den_out.eps, sch, 0.0);
    }
  }
  return x;
}

}  // namespace gicd
