#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gapweaver/bloch1d.hpp"
#include "gapweaver/cme2d.hpp"
#include "gapweaver/elliptic2d.hpp"
#include "gapweaver/jacobian.hpp"

namespace gapweaver {

/// Write-temp-then-rename so readers never observe partial artifacts.
void write_file_atomic(const std::string& path, const std::string& content);

std::uint64_t file_checksum(const std::string& path);

/// Band file: one JSON header line {eta, grid_n, n_eigs, k_grid}, then a CSV
/// block k, rho_1(k), ..., rho_N(k).
void write_band_file(const std::string& path, const BandData& bd);

/// Eigenfunction file: JSON header line, then little-endian 8-byte float
/// columns (x, psi_1.., phi_1..) in column order.
void write_eigenfunction_file(const std::string& path, const EdgeEigenfunctions& efs);

/// Coefficient file: flat JSON with the eleven constants plus provenance.
void write_coefficients_file(const std::string& path, const ResonanceCoefficients& c);
ResonanceCoefficients read_coefficients_file(const std::string& path);

/// Field file: JSON header {D, dy, omega, sigma, class_tag, components:3,
/// layout:"row-major", scalar:"complex128-interleaved"} plus the raw
/// little-endian payload of the three components.
void write_field_file(const std::string& path, const CMEField& f);
CMEField read_field_file(const std::string& path);

/// Grid field uses the same container with 2D-specific metadata.
void write_grid_field_file(const std::string& path, const GridField2D& g);
GridField2D read_grid_field_file(const std::string& path);

/// Branch file: CSV (omega, amplitude, field_path).
void write_branch_file(const std::string& path, const SolutionBranch& br,
                       const std::vector<std::string>& field_paths);

/// Kernel report: CSV (D, lJ1..lJ4, subspace_angle) + JSON verdict.
void write_kernel_report(const std::string& csv_path, const std::string& json_path,
                         const KernelReport& rep);

/// Convergence report: CSV (epsilon, error, grid_n) + JSON summary.
void write_convergence_report(const std::string& csv_path, const std::string& json_path,
                              const ConvergenceStudy& st, const std::string& cls,
                              double omega);

struct ManifestEntry {
    std::string path;
    std::uint64_t checksum;
};

/// Run manifest listing inputs, outputs and checksums.
void write_manifest(const std::string& path, const std::string& command,
                    const std::string& config_json, const std::vector<ManifestEntry>& inputs,
                    const std::vector<ManifestEntry>& outputs);

}  // namespace gapweaver
