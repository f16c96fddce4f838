#include <gtest/gtest.h>

#include <sstream>

#include "anycast/io.hpp"

using namespace anycast;

namespace {

const char* kExample = R"({
  "n": 2,
  "corr": [[0.1, 0.9], [0.5, 0.5]],
  "arrivals": [1, 1],
  "thresholds": [0.7, 0.7],
  "eta": 1.0,
  "gamma_cost": [10, 10],
  "d": 0.5
})";

}  // namespace

TEST(InstanceJson, ParsesScalarAndArrayParameters) {
  const LoadedInstance li = parse_instance(kExample);
  EXPECT_TRUE(li.adjustments.empty());
  const SystemInstance& inst = li.instance;
  EXPECT_EQ(inst.corr, two_node_example().corr);
  EXPECT_EQ(inst.eta, (Vector{1.0, 1.0}));
  EXPECT_EQ(inst.gamma_cost, (Vector{10.0, 10.0}));
  EXPECT_EQ(inst.latency, (Vector{0.5, 0.5}));
}

TEST(InstanceJson, RoundTripsBitExactly) {
  SystemInstance inst = two_node_example();
  inst.corr = Matrix{{1.0 / 3.0, 2.0 / 3.0}, {0.1, 0.9}};
  inst.latency = {0.1 + 0.2, 1e-17};
  const LoadedInstance back = instance_from_json(Json::parse(instance_to_json(inst).dump()));
  EXPECT_EQ(back.instance.corr, inst.corr);
  EXPECT_EQ(back.instance.latency, inst.latency);
  EXPECT_EQ(back.instance.arrivals, inst.arrivals);
}

TEST(InstanceJson, RescalesNearlyStochasticRows) {
  Json j = Json::parse(kExample);
  j["corr"][0] = {0.1, 0.9 + 5e-10};
  const LoadedInstance li = instance_from_json(j);
  ASSERT_EQ(li.adjustments.size(), 1u);
  EXPECT_EQ(li.adjustments[0].row, 0u);
  EXPECT_TRUE(validate(li.instance).ok());
  j["corr"][0] = {0.1, 0.9 + 5e-8};
  const LoadedInstance bad = instance_from_json(j);
  EXPECT_TRUE(bad.adjustments.empty());
  EXPECT_FALSE(validate(bad.instance).ok());
}

TEST(InstanceJson, FormatErrors) {
  EXPECT_THROW(parse_instance("{not json"), FormatError);
  EXPECT_THROW(parse_instance("[]"), FormatError);
  Json j = Json::parse(kExample);
  j.erase("arrivals");
  EXPECT_THROW(instance_from_json(j), FormatError);
  j = Json::parse(kExample);
  j["thresholds"] = {0.7};
  EXPECT_THROW(instance_from_json(j), FormatError);
  j = Json::parse(kExample);
  j["corr"][1] = {0.5};
  EXPECT_THROW(instance_from_json(j), FormatError);
  j = Json::parse(kExample);
  j["n"] = 0;
  EXPECT_THROW(instance_from_json(j), FormatError);
  j = Json::parse(kExample);
  j["arrivals"] = 1.0;  // arrivals must be per node
  EXPECT_THROW(instance_from_json(j), FormatError);
  try {
    parse_instance("{", "file.json");
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(std::string(e.what()).rfind("file.json: ", 0), 0u);
  }
}

TEST(HistoryCsv, HeaderAndGapColumn) {
  std::vector<DualHistoryRow> rows(2);
  rows[0] = {1, 0.5, 0.5, 2.0, -0.1, 0.25};
  rows[1] = {2, 0.4, 0.5, 1.0, -0.2, std::nullopt};
  std::ostringstream os;
  write_history_csv(os, rows);
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "k,dual,best_dual,grad_norm_sq,max_overload,gap");
  std::getline(in, line);
  EXPECT_EQ(line, "1,0.5,0.5,2,-0.10000000000000001,0.25");
  std::getline(in, line);
  EXPECT_EQ(line.back(), ',');
}

TEST(TrajectoryCsv, DownsamplesKeepingEndpoints) {
  Trajectory traj;
  for (int k = 0; k <= 100; ++k) traj.samples.push_back({k * 0.1, {0.5, 0.5}, {0.1, 0.2}, {0.0, 0.0}, 0.0});
  std::ostringstream os;
  write_trajectory_csv(os, traj, 10);
  std::istringstream in(os.str());
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 11u);
  EXPECT_EQ(lines[1].substr(0, 2), "0,");
  EXPECT_EQ(lines.back().substr(0, 3), "10,");
}

TEST(StabilityJson, KeysPresent) {
  const Json j = stability_to_json(analyze(two_node_example()));
  for (const char* key : {"in_polytope", "slack", "node_conditions", "two_node_class",
                          "fixed_point_windows", "fixed_points"})
    EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_FALSE(j["in_polytope"].get<bool>());
  EXPECT_EQ(j["two_node_class"]["class"], "INDETERMINATE");
  EXPECT_EQ(j["fixed_point_windows"]["vertex_0_1"]["empty"], true);
}

TEST(ExperimentConfigJson, RoundTripAndUnknownKeys) {
  ExperimentConfig cfg;
  cfg.n = 7;
  cfg.load_grid = {0.5, 2.0};
  cfg.corr_gen.self_corr = 0.25;
  cfg.algorithm = Algorithm::Greedy;
  const ExperimentConfig back = experiment_config_from_json(experiment_config_to_json(cfg));
  EXPECT_EQ(back.n, 7u);
  EXPECT_EQ(back.load_grid, cfg.load_grid);
  EXPECT_EQ(back.corr_gen.self_corr, 0.25);
  EXPECT_EQ(back.algorithm, Algorithm::Greedy);
  EXPECT_THROW(experiment_config_from_json(Json{{"bogus", 1}}), FormatError);
  EXPECT_THROW(experiment_config_from_json(Json{{"algorithm", "fast"}}), FormatError);
  EXPECT_THROW(experiment_config_from_json(Json{{"n", -3}}), FormatError);
}

TEST(SweepCsv, HeaderAndEmptyCells) {
  SweepResult r;
  SweepRow row;
  row.mean_load = 0.1;
  row.mean_uncontrollable = 0.0;
  r.rows.push_back(row);
  std::ostringstream os;
  write_sweep_csv(os, r);
  EXPECT_EQ(os.str(),
            "abar,mean_cost,std_cost,mean_uncontrollable_count,overload_sentinel_rate\n"
            "0.10000000000000001,,,0,\n");
}
