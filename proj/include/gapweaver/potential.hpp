#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gapweaver {

enum class PotentialKind { OneMinusCos, Table };

/// A 2pi-periodic real potential W(x), either closed-form or a uniform
/// sample table over [0, 2pi). Immutable after construction.
class PeriodicPotential {
  public:
    static PeriodicPotential one_minus_cos();
    static PeriodicPotential zero();
    /// Tabulated kind; evaluation uses trigonometric interpolation.
    static PeriodicPotential table(std::vector<double> samples, std::string label = "table");

    double operator()(double x) const;

    PotentialKind kind() const { return kind_; }
    const std::string& label() const { return label_; }
    const std::vector<double>& samples() const { return samples_; }

    /// Scaled copy: s*W. Only the product eta*W enters the eigenproblems.
    PeriodicPotential scaled(double s) const;

  private:
    PeriodicPotential() = default;
    PotentialKind kind_ = PotentialKind::Table;
    std::string label_;
    std::vector<double> samples_;       // kind Table: raw samples on [0,2pi)
    std::vector<double> cos_c_, sin_c_; // trig interpolation coefficients
    void build_trig_coeffs();
};

/// Values at x_j = 2*pi*j/n. Closed-form kinds are evaluated exactly,
/// tables are resampled by trigonometric interpolation.
std::vector<double> sample_potential(const PeriodicPotential& p, int n);

struct EvennessReport {
    bool even;
    double max_asymmetry;
};

/// Checks W(-x) = W(x) to 1e-12 on the natural grid of the potential.
EvennessReport check_evenness(const PeriodicPotential& p, int n = 0);

/// JSON descriptor round-trip:
/// {"kind": "one-minus-cos" | "table", "samples": [...], "label": "..."}
std::string potential_to_json(const PeriodicPotential& p);
PeriodicPotential potential_from_json(const std::string& text);

/// FNV-1a hash of the canonical descriptor, used for artifact provenance.
std::uint64_t potential_hash(const PeriodicPotential& p);

}  // namespace gapweaver
