#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "purcell/errors.hpp"
#include "purcell/io.hpp"

using namespace purcell;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "purcell_test_io";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("schema version and unknown keys") {
  auto j = io::read_json_file(PURCELL_DATA_DIR "/paper_table3.json");
  CHECK_NOTHROW(io::stats_from_json(j));

  auto extra = j;
  extra["p_d_e_given_g"] = 0.1;
  CHECK_THROWS_AS(io::stats_from_json(extra), UsageError);

  auto unversioned = j;
  unversioned.erase("schema_version");
  CHECK_THROWS_AS(io::stats_from_json(unversioned), UsageError);

  auto future = j;
  future["schema_version"] = 2;
  CHECK_THROWS_AS(io::stats_from_json(future), UsageError);

  auto missing = j;
  missing.erase("r_c");
  CHECK_THROWS_AS(io::stats_from_json(missing), UsageError);

  auto wrong_type = j;
  wrong_type["r_a"] = "0.093";
  CHECK_THROWS_AS(io::stats_from_json(wrong_type), UsageError);
}

TEST_CASE("roundtrips") {
  const auto net = io::network_from_json(io::read_json_file(PURCELL_DATA_DIR "/device_like_network.json"));
  const auto net2 = io::network_from_json(io::to_json(net));
  CHECK(net2.coupler_position == net.coupler_position);
  CHECK(net2.resonator_segments.size() == net.resonator_segments.size());
  CHECK(net2.josephson_energy == net.josephson_energy);

  NetworkSpec open = net;
  open.output_impedance = std::numeric_limits<double>::infinity();
  const auto j = io::to_json(open);
  CHECK(j["output_impedance"] == "inf");
  CHECK(std::isinf(io::network_from_json(j).output_impedance));

  const auto dev = io::device_from_json(io::read_json_file(PURCELL_DATA_DIR "/device_params.json"));
  const auto dev2 = io::device_from_json(io::to_json(dev));
  CHECK(dev2.two_chi == dev.two_chi);
  CHECK(dev2.gamma_ex_q == dev.gamma_ex_q);

  const auto stats = io::stats_from_json(io::read_json_file(PURCELL_DATA_DIR "/paper_table3.json"));
  const auto stats2 = io::stats_from_json(io::to_json(stats));
  CHECK(stats2.p_c_e_given_e == stats.p_c_e_given_e);
  CHECK(stats2.r_b == stats.r_b);
}

TEST_CASE("stats from csv") {
  const std::string csv =
      "name,value\n"
      "p_a_e_given_g,0.007\np_a_g_given_e,0.077\np_b_e_given_g,0.022\np_b_g_given_e,0.03\n"
      "p_c_g_given_g,0.01\np_c_e_given_e,0.227\nr_a,0.093\nr_b,25\nr_c,0.14\n";
  const auto s = io::stats_from_csv(csv);
  CHECK(s.r_b == 25.0);
  CHECK(s.p_c_e_given_e == 0.227);
  CHECK_THROWS_AS(io::stats_from_csv("name,value\nr_a,0.1\n"), UsageError);
  CHECK_THROWS_AS(io::stats_from_csv(csv + "bogus,1\n"), UsageError);

  const auto path = scratch("stats.csv");
  io::write_atomic(path, csv);
  CHECK(io::load_stats(path).r_a == 0.093);
}

TEST_CASE("trace csv") {
  const auto t = io::trace_from_csv("freq_hz,re,im\n1e9,1,0\n2e9,0.5,-0.5\n3e9,0,1\n");
  REQUIRE(t.size() == 3);
  CHECK(t.values[1] == std::complex<double>(0.5, -0.5));
  const auto back = io::trace_from_csv(io::trace_csv(t));
  CHECK(back.freqs == t.freqs);
  CHECK(back.values == t.values);
  CHECK_THROWS_AS(io::trace_from_csv("freq_hz,re,im\n1e9,1\n"), UsageError);
  CHECK_THROWS_AS(io::trace_from_csv("freq_hz,re,im\n1e9,x,0\n"), UsageError);
}

TEST_CASE("grid and band parsing") {
  const auto g = io::parse_grid("0:200e-9:41");
  REQUIRE(g.size() == 41);
  CHECK(g.front() == 0.0);
  CHECK(g.back() == doctest::Approx(200e-9));
  CHECK(g[1] == doctest::Approx(5e-9));
  CHECK_THROWS_AS(io::parse_grid("0:1"), UsageError);
  CHECK(io::parse_grid("3e-9:3e-9:1") == std::vector<double>{3e-9});
  CHECK_THROWS_AS(io::parse_grid("0:1:0"), UsageError);
  CHECK_THROWS_AS(io::parse_grid("0:1:2.5"), UsageError);
  CHECK_THROWS_AS(io::parse_grid("1:0:5"), UsageError);
  const auto [lo, hi] = io::parse_band("7.9e9:8.7e9");
  CHECK(lo == 7.9e9);
  CHECK(hi == 8.7e9);
  CHECK_THROWS_AS(io::parse_band("8e9:7e9"), UsageError);
}

TEST_CASE("files") {
  CHECK_THROWS_AS(io::read_json_file("/nonexistent/file.json"), UsageError);
  const auto bad = scratch("bad.json");
  io::write_atomic(bad, "{ not json");
  CHECK_THROWS_AS(io::read_json_file(bad), UsageError);

  const auto out = scratch("atomic.txt");
  io::write_atomic(out, "first");
  io::write_atomic(out, "second");
  CHECK(io::read_text_file(out) == "second");
  CHECK_FALSE(fs::exists(out.string() + ".tmp"));

  CHECK(io::sci(1.0) == "1.00000000000e+00");
}
