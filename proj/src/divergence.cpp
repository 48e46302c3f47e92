#include "rotlab/divergence.hpp"

#include <cmath>

namespace rotlab {

Divergence::Divergence(DivergenceFamily family, double alpha)
    : family_(family), alpha_(alpha) {
  beta_ = (family == DivergenceFamily::KL) ? 0.0 : alpha / (alpha - 1.0);
  // Construction-time calibration checks: psi'(t0) = 1 and phi(1) = 0.
  if (std::abs(psi(t0(), 1) - 1.0) > 1e-12 || std::abs(phi(1.0)) > 1e-12)
    throw std::logic_error("divergence calibration failed");
}

Divergence Divergence::tsallis(double alpha) {
  if (!(alpha > 1.0) || !(alpha <= 2.0))
    throw std::invalid_argument("tsallis alpha must lie in (1, 2]");
  if (alpha == 2.0) return quadratic();
  return Divergence(DivergenceFamily::Tsallis, alpha);
}

Divergence Divergence::parse(std::string_view text) {
  if (text == "kl") return kl();
  if (text == "quad") return quadratic();
  constexpr std::string_view prefix = "tsallis:";
  if (text.substr(0, prefix.size()) == prefix) {
    std::string arg(text.substr(prefix.size()));
    size_t pos = 0;
    double alpha = 0.0;
    try {
      alpha = std::stod(arg, &pos);
    } catch (const std::exception&) {
      pos = std::string::npos;
    }
    if (pos != arg.size()) throw std::invalid_argument("bad tsallis exponent: " + arg);
    return tsallis(alpha);
  }
  throw std::invalid_argument("unknown divergence: " + std::string(text) +
                              " (expected kl, tsallis:<alpha>, quad)");
}

std::string Divergence::encode() const {
  switch (family_) {
    case DivergenceFamily::KL: return "kl";
    case DivergenceFamily::Quadratic: return "quad";
    case DivergenceFamily::Tsallis: {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "tsallis:%.12g", alpha_);
      return buf;
    }
  }
  return "";
}

double Divergence::psi(double t, int order) const {
  switch (family_) {
    case DivergenceFamily::KL: {
      return std::exp(t - 1.0);  // psi = psi' = psi''
    }
    case DivergenceFamily::Quadratic: {
      if (order == 0) return t > 0.0 ? 0.5 * t * t + 0.5 : 0.5;
      if (order == 1) return t > 0.0 ? t : 0.0;
      return t > 0.0 ? 1.0 : 0.0;
    }
    case DivergenceFamily::Tsallis: {
      if (t <= 0.0) return order == 0 ? 1.0 / alpha_ : 0.0;
      if (order == 0) return std::pow(t, beta_) / beta_ + 1.0 / alpha_;
      if (order == 1) return std::pow(t, beta_ - 1.0);
      return (beta_ - 1.0) * std::pow(t, beta_ - 2.0);
    }
  }
  return 0.0;
}

double Divergence::phi(double t) const {
  if (t < 0.0) throw std::invalid_argument("phi: density argument must be >= 0");
  switch (family_) {
    case DivergenceFamily::KL:
      return t == 0.0 ? 0.0 : t * std::log(t);
    case DivergenceFamily::Quadratic:
      return 0.5 * (t * t - 1.0);
    case DivergenceFamily::Tsallis:
      return (std::pow(t, alpha_) - 1.0) / alpha_;
  }
  return 0.0;
}

}  // namespace rotlab
