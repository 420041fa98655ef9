#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "doctest.h"
#include "nmd/io/complex.hpp"
#include "nmd/io/synthetic.hpp"
#include "nmd/model/chem.hpp"

using namespace nmd;
using namespace nmd::io;
using geometry::Vec3;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("nmd_test_io_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

ComplexRecord sample_record(bool velocities) {
  ComplexRecord r;
  r.id = "1abc";
  r.atomic_numbers = {6, 8, 7};
  r.masses = {12.011, 15.999, 14.007};
  r.protein.residue_types = {0, 19, 20};
  for (int k = 0; k < 3; ++k) {
    r.protein.ca.push_back(Vec3(1.0 / 3.0 + k, -2.5e-7 * k, 1e12 * k));
    r.protein.n.push_back(Vec3(0.1, 0.2, 0.3 + k));
    r.protein.c.push_back(Vec3(-0.1, std::nextafter(0.2, 1.0), 0.7));
  }
  for (int t = 0; t < 4; ++t) {
    Snapshot s;
    for (int i = 0; i < 3; ++i) {
      s.positions.push_back(Vec3(0.1 * t + i, std::sqrt(2.0) * i, -1.0 / (t + 1)));
      if (velocities) s.velocities.push_back(Vec3(1e-300, -0.0, 3.0 * t));
    }
    r.trajectory.push_back(s);
  }
  r.metadata["source"] = "unit test";
  r.metadata["note"] = "value with spaces";
  return r;
}

constexpr const char* kFixture = R"(nmd-complex 1
id toy
units length=angstrom time=snapshot-interval
atoms 2
residues 1
snapshots 2
velocities 0
meta 1
source	hand written
ligand
6 12.011
8 15.999
protein
GLY 0 0 1 0 0 0 1 0 0
snapshot 0
0.5 0 0
-0.5 0 0
snapshot 1
0.6 0 0
-0.4 0 0
end
)";

}  // namespace

TEST_CASE("text and binary round trips are lossless") {
  for (bool vel : {true, false}) {
    const auto rec = sample_record(vel);
    CHECK(parse_text(to_text(rec)) == rec);
    CHECK(parse_binary(to_binary(rec)) == rec);
    CHECK(to_text(parse_text(to_text(rec))) == to_text(rec));
    CHECK(parse_text(to_text(rec)).has_velocities() == vel);
  }
  const auto dir = scratch_dir("roundtrip");
  const auto rec = sample_record(true);
  save_complex(rec, dir / "a.nmdc");
  save_complex(rec, dir / "b.nmdb", Encoding::binary);
  CHECK(load_complex(dir / "a.nmdc") == rec);
  CHECK(load_complex(dir / "b.nmdb") == rec);
}

TEST_CASE("hand-written fixture") {
  const auto rec = parse_text(kFixture, "fixture");
  CHECK(rec.id == "toy");
  CHECK(rec.atom_count() == 2);
  CHECK(rec.residue_count() == 1);
  CHECK(rec.snapshot_count() == 2);
  CHECK(!rec.has_velocities());
  CHECK(rec.protein.residue_types[0] == model::residue_type("GLY"));
  CHECK(rec.trajectory[1].positions[0].x() == 0.6);
  CHECK(rec.metadata.at("source") == "hand written");
  const auto s = rec.state_at(1);
  CHECK(s.positions[1].x() == -0.4);
  CHECK(s.masses[1] == 15.999);
  CHECK_THROWS_AS(rec.state_at(2), std::out_of_range);
}

TEST_CASE("malformed files report where parsing stopped") {
  const std::string full(kFixture);
  const std::string cut = full.substr(0, full.find("snapshot 1") + 11);
  try {
    parse_text(cut, "cut.nmdc");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("cut.nmdc") != std::string::npos);
    CHECK(msg.find("byte offset") != std::string::npos);
    CHECK(msg.find("end of file") != std::string::npos);
  }

  std::string bad_number = full;
  bad_number.replace(bad_number.find("0.6 0 0"), 3, "0.x");
  try {
    parse_text(bad_number, "bad.nmdc");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("bad.nmdc:19") != std::string::npos);
    CHECK(std::string(e.what()).find("position") != std::string::npos);
  }

  std::string version = full;
  version.replace(0, 13, "nmd-complex 7");
  CHECK_THROWS_WITH_AS(parse_text(version), doctest::Contains("unsupported format version 7"), FormatError);

  std::string residue = full;
  residue.replace(residue.find("GLY"), 3, "XYZ");
  CHECK_THROWS_WITH_AS(parse_text(residue), doctest::Contains("unknown residue name 'XYZ'"), FormatError);

  const std::string bin = to_binary(sample_record(true));
  try {
    parse_binary(std::string_view(bin).substr(0, bin.size() - 5), "cut.nmdb");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("byte offset") != std::string::npos);
    CHECK(msg.find("truncated") != std::string::npos);
  }
  std::string bin_version = bin;
  bin_version[8] = 9;
  CHECK_THROWS_WITH_AS(parse_binary(bin_version), doctest::Contains("unsupported format version 9"), FormatError);
}

TEST_CASE("records are validated before writing") {
  auto rec = sample_record(true);
  rec.trajectory[2].velocities.clear();
  CHECK_THROWS_AS(to_text(rec), std::invalid_argument);
  rec = sample_record(false);
  rec.trajectory[1].positions.pop_back();
  CHECK_THROWS_AS(to_binary(rec), std::invalid_argument);
  rec = sample_record(false);
  rec.metadata["bad"] = "two\nlines";
  CHECK_THROWS_AS(to_text(rec), std::invalid_argument);
}

TEST_CASE("dataset directory loading") {
  const auto dir = scratch_dir("dataset");
  auto a = sample_record(false);
  a.id = "b_second";
  auto b = sample_record(true);
  b.id = "a_first";
  save_complex(a, dir / "2.nmdc");
  save_complex(b, dir / "1.nmdb", Encoding::binary);
  std::ofstream(dir / "notes.txt") << "ignored";
  const auto all = load_dataset(dir);
  REQUIRE(all.size() == 2);
  CHECK(all[0].id == "a_first");
  CHECK(all[1].id == "b_second");
  CHECK_THROWS(load_dataset(scratch_dir("empty")));

  setenv("NMD_DATA_DIR", dir.c_str(), 1);
  CHECK(default_data_dir() == dir);
  unsetenv("NMD_DATA_DIR");
  CHECK(default_data_dir() == std::filesystem::path("data"));
}

TEST_CASE("synthetic spec JSON") {
  SyntheticSpec s;
  s.kind = ForceFieldKind::lennard_jones_binding;
  s.atoms = 3;
  s.seed = 42;
  s.dt_fine = 0.02;
  s.stride = 50;
  const nlohmann::json j = s;
  const auto back = j.get<SyntheticSpec>();
  CHECK(nlohmann::json(back) == j);
  CHECK(j.at("kind") == "lennard-jones-binding");

  CHECK_THROWS_WITH(nlohmann::json({{"atomz", 2}}).get<SyntheticSpec>(), doctest::Contains("unknown key 'atomz'"));
  CHECK_THROWS_WITH(nlohmann::json({{"dt_fine", 0.01}, {"stride", 50}}).get<SyntheticSpec>(),
                    doctest::Contains("dt_fine * stride"));
  CHECK_THROWS(nlohmann::json({{"stiffness", -1.0}}).get<SyntheticSpec>());
  CHECK_THROWS(nlohmann::json({{"kind", "morse"}}).get<SyntheticSpec>());
}

TEST_CASE("harmonic tether matches the analytic oscillator") {
  SyntheticSpec s;
  s.atoms = 1;
  s.elements = {6};
  s.stiffness = 1.0;
  s.amplitude = 1.0;
  s.seed = 3;
  const auto rec = generate_synthetic(s);
  REQUIRE(rec.snapshot_count() == 100);
  Vec3 anchor = Vec3::Zero();
  for (const auto& ca : rec.protein.ca) anchor += ca;
  anchor /= static_cast<double>(rec.protein.ca.size());
  const Vec3 offset = rec.trajectory[0].positions[0] - anchor;
  CHECK(offset.norm() == doctest::Approx(1.0).epsilon(1e-12));
  const double omega = std::sqrt(1.0 / model::atomic_mass(6));
  double worst = 0.0, worst_v = 0.0;
  for (std::size_t t = 0; t < rec.snapshot_count(); ++t) {
    const double tt = static_cast<double>(t);
    const Vec3 expect = anchor + offset * std::cos(omega * tt);
    const Vec3 expect_v = -offset * omega * std::sin(omega * tt);
    worst = std::max(worst, (rec.trajectory[t].positions[0] - expect).cwiseAbs().maxCoeff());
    worst_v = std::max(worst_v, (rec.trajectory[t].velocities[0] - expect_v).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-3);
  CHECK(worst_v < 1e-3);
}

TEST_CASE("synthetic generation is deterministic and conserves energy") {
  for (auto kind : {ForceFieldKind::harmonic_tether, ForceFieldKind::lennard_jones_binding}) {
    SyntheticSpec s;
    s.kind = kind;
    s.atoms = 3;
    s.sites = 6;
    s.temperature = 0.5;
    s.seed = 11;
    if (kind == ForceFieldKind::lennard_jones_binding) {
      // Stiff repulsive walls need a finer step.
      s.dt_fine = 0.005;
      s.stride = 200;
    }
    const auto a = generate_synthetic(s);
    const auto b = generate_synthetic(s);
    CHECK(a == b);
    CHECK(to_binary(a) == to_binary(b));
    CHECK(std::stod(a.metadata.at("energy_drift")) < 1e-3);
    s.seed = 12;
    CHECK(!(generate_synthetic(s) == a));

  }
}

TEST_CASE("recorded harmonic-tether snapshots conserve the analytic energy") {
  SyntheticSpec s;
  s.atoms = 3;
  s.temperature = 0.3;
  s.stiffness = 0.8;
  s.bond_stiffness = 2.0;
  s.seed = 5;
  const auto rec = generate_synthetic(s);
  Vec3 anchor = Vec3::Zero();
  for (const auto& ca : rec.protein.ca) anchor += ca;
  anchor /= static_cast<double>(rec.protein.ca.size());
  const auto energy = [&](const Snapshot& snap) {
    double e = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      e += 0.5 * rec.masses[i] * snap.velocities[i].squaredNorm();
      e += 0.5 * 0.8 * (snap.positions[i] - anchor).squaredNorm();
    }
    for (std::size_t i = 0; i < 2; ++i) {
      const double d = (snap.positions[i + 1] - snap.positions[i]).norm() - 1.5;
      e += 0.5 * 2.0 * d * d;
    }
    return e;
  };
  const double e0 = energy(rec.trajectory[0]);
  double drift = 0.0;
  for (const auto& snap : rec.trajectory) drift = std::max(drift, std::abs(energy(snap) - e0) / e0);
  CHECK(drift < 1e-3);
  CHECK(rec.metadata.at("source") == "synthetic");
  CHECK(nlohmann::json::parse(rec.metadata.at("synthetic_spec")).get<SyntheticSpec>().seed == 5);
}

TEST_CASE("synthetic protein sites") {
  SyntheticSpec s;
  s.sites = 25;
  const auto p = synthetic_protein(s);
  REQUIRE(p.size() == 25);
  CHECK(p.residue_types[0] == 0);
  CHECK(p.residue_types[19] == 19);
  CHECK(p.residue_types[20] == 0);
  for (std::size_t k = 0; k < p.size(); ++k) {
    CHECK(p.ca[k].norm() == doctest::Approx(3.0).epsilon(0.1));
    CHECK((p.n[k] - p.ca[k]).norm() == doctest::Approx(1.46));
    CHECK((p.c[k] - p.ca[k]).norm() == doctest::Approx(1.52));
    CHECK((p.n[k] - p.ca[k]).normalized().cross((p.c[k] - p.ca[k]).normalized()).norm() > 0.5);
  }
}

TEST_CASE("unstable fine step is reported") {
  SyntheticSpec s;
  s.stiffness = 1e6;
  CHECK_THROWS_WITH(generate_synthetic(s), doctest::Contains("reduce dt_fine"));
}
