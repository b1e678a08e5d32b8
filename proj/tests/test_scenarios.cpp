#include <gtest/gtest.h>

#include <set>

#include "podlim/io.hpp"
#include "podlim/scenarios.hpp"

using namespace podlim;
using json = nlohmann::json;

namespace {

std::set<std::string> keys(const json& j) {
  std::set<std::string> k;
  for (const auto& [key, v] : j.items()) k.insert(key);
  return k;
}

json two_machine_config() {
  return {{"kind", "two_machine_analysis"},
          {"parameters", {{"M1", 2.0}, {"M2", 2.0}, {"X1", 0.1}, {"X2", 0.9}}},
          {"outputs", "out/tm"}};
}

}  // namespace

TEST(Repro, EveryFigureSummaryUsesDeclaredKeys) {
  const auto& schema = scen::summary_schema();
  for (const std::string& id : scen::figure_ids()) {
    const scen::Result r = scen::repro(id);
    EXPECT_EQ(r.id, id);
    const auto& allowed = schema.at(id);
    for (const std::string& k : keys(r.summary))
      EXPECT_NE(std::find(allowed.begin(), allowed.end(), k), allowed.end()) << id << "." << k;
    EXPECT_FALSE(r.files.empty()) << id;
    for (const auto& f : r.files) EXPECT_EQ(f.name.rfind(id + "_", 0), 0u) << f.name;
  }
}

TEST(Repro, SummaryKeySetsArePinned) {
  // Consumers of the summaries depend on these names.
  const auto& s = scen::summary_schema();
  EXPECT_EQ(s.size(), scen::figure_ids().size());
  EXPECT_EQ(std::set<std::string>(s.at("fig6").begin(), s.at("fig6").end()),
            (std::set<std::string>{"q1", "q2", "Kz", "P_band", "R_band", "P_band_inside", "R_band_inside",
                                   "P_sup_outside", "R_sup_outside", "closed_loop_stable", "S_stable",
                                   "marginal_roots"}));
  EXPECT_EQ(std::set<std::string>(s.at("fig4").begin(), s.at("fig4").end()),
            (std::set<std::string>{"q1", "q2", "Omega", "notch_d1", "notch_d2"}));
  EXPECT_EQ(s.at("fig18").size(), 16u);
}

TEST(Repro, Fig6IsDeterministic) {
  const scen::Result a = scen::repro("fig6"), b = scen::repro("fig6");
  ASSERT_EQ(a.files.size(), b.files.size());
  for (std::size_t i = 0; i < a.files.size(); ++i) {
    EXPECT_EQ(a.files[i].name, b.files[i].name);
    EXPECT_EQ(a.files[i].content, b.files[i].content);
  }
  EXPECT_EQ(a.summary.dump(), b.summary.dump());
}

TEST(Repro, Fig6CsvHeaderAndBand) {
  const scen::Result r = scen::repro("fig6");
  EXPECT_EQ(r.files.front().content.substr(0, r.files.front().content.find('\n')), "omega,mag,phase_deg");
  EXPECT_TRUE(r.summary.at("P_band_inside").get<bool>());
  EXPECT_TRUE(r.summary.at("R_band_inside").get<bool>());
  EXPECT_TRUE(r.summary.at("S_stable").get<bool>());
}

TEST(Repro, UnknownFigure) { EXPECT_THROW(scen::repro("fig99"), ConfigError); }

TEST(Config, TwoMachineAnalysis) {
  const scen::Result r = scen::run_config(two_machine_config());
  EXPECT_NEAR(r.summary.at("q1").get<double>(), 0.745356, 1e-6);
  EXPECT_NEAR(r.summary.at("q2").get<double>(), 2.236068, 1e-6);
  EXPECT_NEAR(r.summary.at("Omega").get<double>(), 1.0, 1e-12);
  EXPECT_EQ(r.summary.at("eigenvalues").size(), 4u);
}

TEST(Config, GridOverride) {
  json c = two_machine_config();
  c["grid"] = {{"min", 0.1}, {"max", 10.0}, {"points", 7}};
  const scen::Result r = scen::run_config(c);
  const std::string& csv = r.files.back().content;
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 8);
}

TEST(Config, ValidationErrorsNameTheKey) {
  auto expect_msg = [](json c, const std::string& fragment) {
    try {
      scen::validate_config(c);
      ADD_FAILURE() << "accepted: " << c.dump();
    } catch (const ConfigError& e) {
      EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
  };
  json c = two_machine_config();
  c["parameters"].erase("X2");
  expect_msg(c, "parameters.X2");
  c = two_machine_config();
  c["kind"] = "nonsense";
  expect_msg(c, "nonsense");
  c = two_machine_config();
  c.erase("outputs");
  expect_msg(c, "outputs");
  c = two_machine_config();
  c["grid"] = {{"min", 1.0}, {"max", 0.5}, {"points", 10}};
  expect_msg(c, "grid");
  expect_msg(json::array(), "object");
  c = two_machine_config();
  c["parameters"]["M1"] = "two";
  EXPECT_THROW(scen::run_config(c), ConfigError);
}

TEST(Config, SchemaListsKindsAndRequirements) {
  const json s = scen::config_schema();
  EXPECT_EQ(s.at("$schema"), "https://json-schema.org/draft/2020-12/schema");
  EXPECT_EQ(s.at("properties").at("kind").at("enum").size(), scen::scenario_kinds().size());
  EXPECT_EQ(s.at("allOf").size(), scen::required_parameters().size());
}

TEST(Config, LinearizeReportsInterAreaMode) {
  const json c = {{"kind", "linearize"},
                  {"parameters", {{"outputs", {{{"kind", "machine_speed"}, {"location", 0}}}}, {"deflate", true}}},
                  {"outputs", "out/lin"}};
  const scen::Result r = scen::run_config(c);
  EXPECT_EQ(r.summary.at("states").get<int>(), 7);
  EXPECT_LT(r.summary.at("interarea_zeta").get<double>(), 0.05);
  const StateSpace back = io::state_space_from_json(json::parse(r.files.front().content));
  EXPECT_EQ(back.n(), 7);
}

TEST(Config, SimulateRejectsUnknownBus) {
  const json c = {{"kind", "simulate"},
                  {"parameters",
                   {{"disturbances", {{{"bus", 42}, {"delta_P", 10.0}, {"t_start", 0.0}, {"duration", 1.0}}}}}},
                  {"outputs", "out/sim"}};
  EXPECT_THROW(scen::run_config(c), ConfigError);
}

TEST(Io, RationalAndStateSpaceRoundTrip) {
  const RationalTF f(Polynomial{1.0, 2.0}, Polynomial{3.0, 4.0, 5.0});
  const RationalTF g = io::rational_from_json(io::to_json(f));
  EXPECT_EQ(f.num().coeffs(), g.num().coeffs());
  EXPECT_EQ(f.den().coeffs(), g.den().coeffs());
  const StateSpace s = ss_from_tf(f);
  const StateSpace t = io::state_space_from_json(io::to_json(s));
  EXPECT_EQ(s.A, t.A);
  EXPECT_EQ(s.B, t.B);
  EXPECT_EQ(s.C, t.C);
  EXPECT_EQ(s.D, t.D);
}
