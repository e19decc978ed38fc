#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "gapweaver/io.hpp"
#include "helpers.hpp"

using namespace gapweaver;
namespace fs = std::filesystem;

namespace {
struct TmpDir {
    fs::path path;
    TmpDir() {
        path = fs::temp_directory_path() / ("gw_io_test_" + std::to_string(::getpid()));
        fs::create_directories(path);
    }
    ~TmpDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};
}  // namespace

TEST_CASE("atomic write leaves no temp file and is re-readable") {
    TmpDir tmp;
    const std::string p = tmp.file("x.txt");
    write_file_atomic(p, "hello\n");
    CHECK(fs::exists(p));
    CHECK_FALSE(fs::exists(p + ".tmp"));
    CHECK(file_checksum(p) == file_checksum(p));
    write_file_atomic(p, "other\n");
    CHECK(file_checksum(p) != 0);
}

TEST_CASE("coefficients file round trip") {
    TmpDir tmp;
    const auto& c = testutil::example_coeffs();
    const std::string p = tmp.file("coeffs.json");
    write_coefficients_file(p, c);
    auto c2 = read_coefficients_file(p);
    CHECK(c2.eta0 == c.eta0);
    CHECK(c2.beta1 == c.beta1);
    CHECK(c2.gamma3 == c.gamma3);
    CHECK(c2.alpha3 == c.alpha3);
    CHECK(c2.potential_hash == c.potential_hash);
}

TEST_CASE("field file round trip is bit exact") {
    TmpDir tmp;
    const auto& c = testutil::example_coeffs();
    CMEField f = make_class_seed(CmeClass::Bii, 2.1, c, 8.0, 0.4);
    const std::string p = tmp.file("field.gwf");
    write_field_file(p, f);
    CMEField g = read_field_file(p);
    CHECK(g.n == f.n);
    CHECK(g.D == f.D);
    CHECK(g.omega == f.omega);
    CHECK(g.cls == f.cls);
    CHECK(g.coeffs.gamma4 == f.coeffs.gamma4);
    for (int comp = 0; comp < 3; ++comp)
        CHECK((g.a[comp] - f.a[comp]).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("grid field file round trip") {
    TmpDir tmp;
    GridField2D g;
    g.n = 17;
    g.X = 3.14;
    g.dx = 2 * g.X / (g.n - 1);
    g.epsilon = 0.05;
    g.omega = 0.7;
    g.eta = 0.22;
    g.sigma = -1;
    g.cls = CmeClass::Bii;
    g.phi.resize(g.cells());
    for (std::size_t i = 0; i < g.cells(); ++i)
        g.phi[i] = std::complex<double>(std::sin(0.1 * i), std::cos(0.2 * i));
    const std::string p = tmp.file("grid.gwf");
    write_grid_field_file(p, g);
    GridField2D h = read_grid_field_file(p);
    CHECK(h.n == g.n);
    CHECK(h.epsilon == g.epsilon);
    CHECK((h.phi - g.phi).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("band and eigenfunction files are written with headers") {
    TmpDir tmp;
    auto p = testutil::cosine_potential();
    auto bd = compute_band_data(p, 0.1745, 3, {0.0, 0.25, 0.5}, 64, false);
    const std::string bp = tmp.file("bands.dat");
    write_band_file(bp, bd);
    std::ifstream in(bp);
    std::string header;
    std::getline(in, header);
    CHECK(header.find("\"eta\"") != std::string::npos);
    std::string csv_head;
    std::getline(in, csv_head);
    CHECK(csv_head == "k,rho1,rho2,rho3");

    auto efs = edge_eigenfunctions(p, 0.1745, 2, 64);
    const std::string ep = tmp.file("efs.dat");
    write_eigenfunction_file(ep, efs);
    CHECK(fs::file_size(ep) > (2 * 64 + 1) * 5 * sizeof(double));
}

TEST_CASE("manifest lists inputs and outputs with checksums") {
    TmpDir tmp;
    const std::string art = tmp.file("a.csv");
    write_file_atomic(art, "x\n1\n");
    const std::string mp = tmp.file("manifest.json");
    write_manifest(mp, "solve", "{\"omega\":1.0}", {}, {{art, file_checksum(art)}});
    std::ifstream in(mp);
    std::string blob((std::istreambuf_iterator<char>(in)), {});
    CHECK(blob.find("\"command\": \"solve\"") != std::string::npos);
    CHECK(blob.find("a.csv") != std::string::npos);
    CHECK(blob.find("checksum") != std::string::npos);
}
