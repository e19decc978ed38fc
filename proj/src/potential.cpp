#include "gapweaver/potential.hpp"

#include <cmath>
#include <cstdio>

#include "gapweaver/errors.hpp"
#include "json.hpp"

namespace gapweaver {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

PeriodicPotential PeriodicPotential::one_minus_cos() {
    PeriodicPotential p;
    p.kind_ = PotentialKind::OneMinusCos;
    p.label_ = "one-minus-cos";
    return p;
}

PeriodicPotential PeriodicPotential::zero() {
    return table(std::vector<double>(4, 0.0), "zero");
}

PeriodicPotential PeriodicPotential::table(std::vector<double> samples, std::string label) {
    if (samples.size() < 4) throw InvalidPotential("potential table needs at least 4 samples");
    for (double v : samples)
        if (!std::isfinite(v)) throw InvalidPotential("non-finite potential sample");
    PeriodicPotential p;
    p.kind_ = PotentialKind::Table;
    p.label_ = std::move(label);
    p.samples_ = std::move(samples);
    p.build_trig_coeffs();
    return p;
}

void PeriodicPotential::build_trig_coeffs() {
    const int m = static_cast<int>(samples_.size());
    const int half = m / 2;
    cos_c_.assign(half + 1, 0.0);
    sin_c_.assign(half + 1, 0.0);
    for (int k = 0; k <= half; ++k) {
        double ac = 0.0, as = 0.0;
        for (int j = 0; j < m; ++j) {
            double ang = kTwoPi * k * j / m;
            ac += samples_[j] * std::cos(ang);
            as += samples_[j] * std::sin(ang);
        }
        cos_c_[k] = 2.0 * ac / m;
        sin_c_[k] = 2.0 * as / m;
    }
    cos_c_[0] *= 0.5;
    sin_c_[0] = 0.0;
    if (m % 2 == 0) {  // Nyquist mode carries half weight
        cos_c_[half] *= 0.5;
        sin_c_[half] = 0.0;
    }
}

double PeriodicPotential::operator()(double x) const {
    if (kind_ == PotentialKind::OneMinusCos) return 1.0 - std::cos(x);
    double v = 0.0;
    for (std::size_t k = 0; k < cos_c_.size(); ++k)
        v += cos_c_[k] * std::cos(k * x) + sin_c_[k] * std::sin(k * x);
    return v;
}

PeriodicPotential PeriodicPotential::scaled(double s) const {
    if (kind_ == PotentialKind::OneMinusCos) {
        std::vector<double> v(256);
        for (int j = 0; j < 256; ++j) v[j] = s * (1.0 - std::cos(kTwoPi * j / 256));
        return table(std::move(v), label_ + "-scaled");
    }
    std::vector<double> v = samples_;
    for (double& x : v) x *= s;
    return table(std::move(v), label_ + "-scaled");
}

std::vector<double> sample_potential(const PeriodicPotential& p, int n) {
    if (n < 4) throw InvalidPotential("sample grid needs n >= 4");
    std::vector<double> out(n);
    for (int j = 0; j < n; ++j) {
        out[j] = p(kTwoPi * j / n);
        if (!std::isfinite(out[j])) throw InvalidPotential("non-finite value encountered");
    }
    return out;
}

EvennessReport check_evenness(const PeriodicPotential& p, int n) {
    if (n <= 0) {
        n = (p.kind() == PotentialKind::Table) ? static_cast<int>(p.samples().size()) : 512;
    }
    double worst = 0.0;
    if (p.kind() == PotentialKind::Table && n == static_cast<int>(p.samples().size())) {
        const auto& s = p.samples();
        for (int j = 0; j < n; ++j) {
            double d = std::abs(s[j] - s[(n - j) % n]);
            if (d > worst) worst = d;
        }
    } else {
        for (int j = 0; j < n; ++j) {
            double x = kTwoPi * j / n;
            double d = std::abs(p(x) - p(kTwoPi - x));
            if (d > worst) worst = d;
        }
    }
    return {worst <= 1e-12, worst};
}

std::string potential_to_json(const PeriodicPotential& p) {
    nlohmann::json j;
    j["kind"] = (p.kind() == PotentialKind::OneMinusCos) ? "one-minus-cos" : "table";
    j["label"] = p.label();
    if (p.kind() == PotentialKind::Table) j["samples"] = p.samples();
    return j.dump();
}

PeriodicPotential potential_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "one-minus-cos") return PeriodicPotential::one_minus_cos();
    if (kind == "table") {
        auto samples = j.at("samples").get<std::vector<double>>();
        std::string label = j.value("label", "table");
        return PeriodicPotential::table(std::move(samples), std::move(label));
    }
    throw InvalidPotential("unknown potential kind: " + kind);
}

std::uint64_t potential_hash(const PeriodicPotential& p) {
    const std::string s = potential_to_json(p);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace gapweaver
