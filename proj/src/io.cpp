#include "gapweaver/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gapweaver/errors.hpp"
#include "json.hpp"

namespace gapweaver {

namespace {

using nlohmann::json;

std::string dump_doubles_le(const double* v, std::size_t count) {
    // x86-64: native layout is already little-endian 8-byte IEEE doubles
    return std::string(reinterpret_cast<const char*>(v), count * sizeof(double));
}

void append_payload(std::string& out, const Eigen::VectorXcd& v) {
    out.append(reinterpret_cast<const char*>(v.data()),
               static_cast<std::size_t>(v.size()) * sizeof(std::complex<double>));
}

std::string format_csv_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string read_all(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::pair<json, std::string> split_header(const std::string& blob) {
    auto nl = blob.find('\n');
    if (nl == std::string::npos) throw Error("missing header line");
    return {json::parse(blob.substr(0, nl)), blob.substr(nl + 1)};
}

}  // namespace

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw Error("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw Error("rename failed for " + path);
}

std::uint64_t file_checksum(const std::string& path) {
    const std::string blob = read_all(path);
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : blob) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void write_band_file(const std::string& path, const BandData& bd) {
    json hdr;
    hdr["eta"] = bd.eta;
    hdr["grid_n"] = bd.grid_n;
    hdr["n_eigs"] = bd.bands.rows();
    hdr["k_grid"] = bd.k_grid;
    std::string out = hdr.dump();
    out += '\n';
    out += "k";
    for (int b = 0; b < bd.bands.rows(); ++b) out += ",rho" + std::to_string(b + 1);
    out += '\n';
    for (std::size_t i = 0; i < bd.k_grid.size(); ++i) {
        out += format_csv_double(bd.k_grid[i]);
        for (int b = 0; b < bd.bands.rows(); ++b)
            out += "," + format_csv_double(bd.bands(b, i));
        out += '\n';
    }
    write_file_atomic(path, out);
}

void write_eigenfunction_file(const std::string& path, const EdgeEigenfunctions& efs) {
    json hdr;
    hdr["grid_n"] = efs.grid_n;
    hdr["samples"] = 2 * efs.grid_n + 1;
    std::vector<std::string> cols = {"x"};
    for (std::size_t i = 0; i < efs.psi.size(); ++i) cols.push_back("psi" + std::to_string(i + 1));
    for (std::size_t i = 0; i < efs.phi.size(); ++i) cols.push_back("phi" + std::to_string(i + 1));
    hdr["columns"] = cols;
    hdr["scalar"] = "float64-le";
    std::string out = hdr.dump();
    out += '\n';
    out += dump_doubles_le(efs.x.data(), efs.x.size());
    for (const auto& v : efs.psi) out += dump_doubles_le(v.data(), v.size());
    for (const auto& v : efs.phi) out += dump_doubles_le(v.data(), v.size());
    write_file_atomic(path, out);
}

void write_coefficients_file(const std::string& path, const ResonanceCoefficients& c) {
    json j;
    j["eta0"] = c.eta0;
    j["omega0"] = c.omega0;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["gamma1"] = c.gamma1;
    j["gamma2"] = c.gamma2;
    j["gamma3"] = c.gamma3;
    j["gamma4"] = c.gamma4;
    j["alpha1"] = c.alpha1;
    j["alpha2"] = c.alpha2;
    j["alpha3"] = c.alpha3;
    j["provenance"] = {{"grid_n", c.grid_n},
                       {"root_tol", c.root_tol},
                       {"potential_hash", c.potential_hash}};
    write_file_atomic(path, j.dump(2) + "\n");
}

ResonanceCoefficients read_coefficients_file(const std::string& path) {
    json j = json::parse(read_all(path));
    ResonanceCoefficients c;
    c.eta0 = j.at("eta0");
    c.omega0 = j.at("omega0");
    c.beta1 = j.at("beta1");
    c.beta2 = j.at("beta2");
    c.gamma1 = j.at("gamma1");
    c.gamma2 = j.at("gamma2");
    c.gamma3 = j.at("gamma3");
    c.gamma4 = j.at("gamma4");
    c.alpha1 = j.at("alpha1");
    c.alpha2 = j.at("alpha2");
    c.alpha3 = j.at("alpha3");
    if (j.contains("provenance")) {
        c.grid_n = j["provenance"].value("grid_n", 0);
        c.root_tol = j["provenance"].value("root_tol", 0.0);
        c.potential_hash = j["provenance"].value("potential_hash", 0ull);
    }
    return c;
}

void write_field_file(const std::string& path, const CMEField& f) {
    json hdr;
    hdr["D"] = f.D;
    hdr["dy"] = f.dy;
    hdr["n"] = f.n;
    hdr["omega"] = f.omega;
    hdr["sigma"] = f.sigma;
    hdr["class_tag"] = class_tag(f.cls);
    hdr["components"] = 3;
    hdr["layout"] = "row-major";
    hdr["scalar"] = "complex128-interleaved";
    hdr["coeffs"] = {{"eta0", f.coeffs.eta0},     {"omega0", f.coeffs.omega0},
                     {"beta1", f.coeffs.beta1},   {"beta2", f.coeffs.beta2},
                     {"gamma1", f.coeffs.gamma1}, {"gamma2", f.coeffs.gamma2},
                     {"gamma3", f.coeffs.gamma3}, {"gamma4", f.coeffs.gamma4},
                     {"alpha1", f.coeffs.alpha1}, {"alpha2", f.coeffs.alpha2},
                     {"alpha3", f.coeffs.alpha3}};
    std::string out = hdr.dump();
    out += '\n';
    for (const auto& comp : f.a) append_payload(out, comp);
    write_file_atomic(path, out);
}

CMEField read_field_file(const std::string& path) {
    auto [hdr, payload] = split_header(read_all(path));
    CMEField f;
    f.D = hdr.at("D");
    f.dy = hdr.at("dy");
    f.n = hdr.at("n");
    f.omega = hdr.at("omega");
    f.sigma = hdr.at("sigma");
    f.cls = class_from_tag(hdr.at("class_tag"));
    const auto& co = hdr.at("coeffs");
    f.coeffs.eta0 = co.at("eta0");
    f.coeffs.omega0 = co.at("omega0");
    f.coeffs.beta1 = co.at("beta1");
    f.coeffs.beta2 = co.at("beta2");
    f.coeffs.gamma1 = co.at("gamma1");
    f.coeffs.gamma2 = co.at("gamma2");
    f.coeffs.gamma3 = co.at("gamma3");
    f.coeffs.gamma4 = co.at("gamma4");
    f.coeffs.alpha1 = co.at("alpha1");
    f.coeffs.alpha2 = co.at("alpha2");
    f.coeffs.alpha3 = co.at("alpha3");
    const std::size_t cells = static_cast<std::size_t>(f.n) * f.n;
    const std::size_t bytes = cells * sizeof(std::complex<double>);
    if (payload.size() < 3 * bytes) throw Error("field payload truncated in " + path);
    for (int c = 0; c < 3; ++c) {
        f.a[c].resize(cells);
        std::memcpy(f.a[c].data(), payload.data() + c * bytes, bytes);
    }
    return f;
}

void write_grid_field_file(const std::string& path, const GridField2D& g) {
    json hdr;
    hdr["X"] = g.X;
    hdr["dx"] = g.dx;
    hdr["n"] = g.n;
    hdr["epsilon"] = g.epsilon;
    hdr["omega"] = g.omega;
    hdr["eta"] = g.eta;
    hdr["sigma"] = g.sigma;
    hdr["class_tag"] = class_tag(g.cls);
    hdr["components"] = 1;
    hdr["layout"] = "row-major";
    hdr["scalar"] = "complex128-interleaved";
    std::string out = hdr.dump();
    out += '\n';
    append_payload(out, g.phi);
    write_file_atomic(path, out);
}

GridField2D read_grid_field_file(const std::string& path) {
    auto [hdr, payload] = split_header(read_all(path));
    GridField2D g;
    g.X = hdr.at("X");
    g.dx = hdr.at("dx");
    g.n = hdr.at("n");
    g.epsilon = hdr.at("epsilon");
    g.omega = hdr.at("omega");
    g.eta = hdr.at("eta");
    g.sigma = hdr.at("sigma");
    g.cls = class_from_tag(hdr.at("class_tag"));
    const std::size_t cells = static_cast<std::size_t>(g.n) * g.n;
    const std::size_t bytes = cells * sizeof(std::complex<double>);
    if (payload.size() < bytes) throw Error("grid field payload truncated in " + path);
    g.phi.resize(cells);
    std::memcpy(g.phi.data(), payload.data(), bytes);
    return g;
}

void write_branch_file(const std::string& path, const SolutionBranch& br,
                       const std::vector<std::string>& field_paths) {
    std::string out = "omega,amplitude,field_path\n";
    for (std::size_t i = 0; i < br.omega.size(); ++i) {
        out += format_csv_double(br.omega[i]) + "," + format_csv_double(br.amplitude[i]) +
               ",";
        if (i < field_paths.size()) out += field_paths[i];
        out += '\n';
    }
    write_file_atomic(path, out);
}

void write_kernel_report(const std::string& csv_path, const std::string& json_path,
                         const KernelReport& rep) {
    std::string csv = "D,lJ1,lJ2,lJ3,lJ4,subspace_angle\n";
    for (const auto& row : rep.rows) {
        csv += format_csv_double(row.D);
        for (double e : row.eigs) csv += "," + format_csv_double(e);
        csv += "," + format_csv_double(row.subspace_angle) + "\n";
    }
    write_file_atomic(csv_path, csv);
    json v;
    v["verdict"] = rep.verdict ? "persistence conditions verified"
                               : "persistence conditions not verified";
    v["computed"] = rep.computed;
    if (!rep.note.empty()) v["note"] = rep.note;
    write_file_atomic(json_path, v.dump(2) + "\n");
}

void write_convergence_report(const std::string& csv_path, const std::string& json_path,
                              const ConvergenceStudy& st, const std::string& cls,
                              double omega) {
    std::string csv = "epsilon,error,grid_n\n";
    for (std::size_t i = 0; i < st.eps.size(); ++i)
        csv += format_csv_double(st.eps[i]) + "," + format_csv_double(st.err[i]) + "," +
               std::to_string(st.grid_n[i]) + "\n";
    write_file_atomic(csv_path, csv);
    json j;
    j["slope"] = st.slope;
    j["intercept"] = st.intercept;
    j["class"] = cls;
    j["omega"] = omega;
    j["complete"] = st.complete;
    if (!st.note.empty()) j["note"] = st.note;
    write_file_atomic(json_path, j.dump(2) + "\n");
}

void write_manifest(const std::string& path, const std::string& command,
                    const std::string& config_json, const std::vector<ManifestEntry>& inputs,
                    const std::vector<ManifestEntry>& outputs) {
    json j;
    j["command"] = command;
    j["config"] = json::parse(config_json);
    auto pack = [](const std::vector<ManifestEntry>& v) {
        json arr = json::array();
        for (const auto& e : v) {
            char hex[20];
            std::snprintf(hex, sizeof hex, "%016llx",
                          static_cast<unsigned long long>(e.checksum));
            arr.push_back({{"path", e.path}, {"checksum", hex}});
        }
        return arr;
    };
    j["inputs"] = pack(inputs);
    j["outputs"] = pack(outputs);
    write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace gapweaver
