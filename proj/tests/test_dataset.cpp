#include "locoplan/dataset.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "locoplan/initializer.hpp"

using namespace locoplan;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  const fs::path dir =
      fs::temp_directory_path() / "locoplan_dataset_test";
  fs::create_directories(dir);
  return dir;
}

ExperimentRecord sample_record(int i) {
  ExperimentRecord r;
  r.task.initial_base_position = {-1.0 + 0.01 * i, 0.2, 0.42};
  r.task.goal_base_position = {0.6, 0.0, 0.585};
  r.task.initial_yaw = 0.1 * i;
  r.task.environment_id = "single_pallet";
  r.initializer = i % 2 == 0 ? "heuristic" : "learned";
  r.budget = 100;
  r.layout_hash = 0xabcdef01u + i;
  r.converged = i % 3 != 0;
  r.iterations = 40 + i;
  r.cost = 38.5 + 0.125 * i;  // bit-representable increments round trip
  r.violation = 1e-5 * i;
  r.wall_time_ms = 1234.5 + i;
  r.strict_pass = i % 2 == 0;
  r.executable_pass = true;
  r.position_drift = 0.01 * i;
  r.solution = Eigen::VectorXd::LinSpaced(5, -1.0, 1.0) * (i + 1);
  return r;
}

}  // namespace

TEST_CASE("task sampling is deterministic and covers the box") {
  TaskSpace space = TaskSpace::ForTerrain(Terrain::SinglePallet());
  const auto a = sample_tasks(space, 200, 42);
  const auto b = sample_tasks(space, 200, 42);
  REQUIRE(a.size() == 200);
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].initial_base_position == b[i].initial_base_position);
    CHECK(a[i].initial_yaw == b[i].initial_yaw);
  }
  double x_lo = 1e9, x_hi = -1e9, yaw_lo = 1e9, yaw_hi = -1e9;
  for (const Task& t : a) {
    CHECK(t.initial_base_position.x() >= space.x_range[0]);
    CHECK(t.initial_base_position.x() <= space.x_range[1]);
    CHECK(t.goal_base_position == space.goal_position);
    x_lo = std::min(x_lo, t.initial_base_position.x());
    x_hi = std::max(x_hi, t.initial_base_position.x());
    yaw_lo = std::min(yaw_lo, t.initial_yaw);
    yaw_hi = std::max(yaw_hi, t.initial_yaw);
  }
  // 200 uniform samples reach within 5% of both edges.
  const double span = space.x_range[1] - space.x_range[0];
  CHECK(x_lo < space.x_range[0] + 0.05 * span);
  CHECK(x_hi > space.x_range[1] - 0.05 * span);
  CHECK(yaw_lo < 0.0);
  CHECK(yaw_hi > 0.0);

  const auto c = sample_tasks(space, 10, 43);
  CHECK(c[0].initial_base_position != a[0].initial_base_position);
}

TEST_CASE("tasks and records round trip through JSON lines bit-exactly") {
  const fs::path dir = temp_dir();

  std::vector<ExperimentRecord> records;
  std::vector<Task> tasks;
  for (int i = 0; i < 7; ++i) {
    records.push_back(sample_record(i));
    tasks.push_back(records.back().task);
  }
  save_tasks(dir / "tasks.jsonl", tasks);
  const auto tasks_back = load_tasks(dir / "tasks.jsonl");
  REQUIRE(tasks_back.size() == tasks.size());
  for (size_t i = 0; i < tasks.size(); ++i) {
    CHECK(tasks_back[i].initial_base_position ==
          tasks[i].initial_base_position);
    CHECK(tasks_back[i].goal_base_position == tasks[i].goal_base_position);
    CHECK(tasks_back[i].initial_yaw == tasks[i].initial_yaw);
    CHECK(tasks_back[i].goal_yaw == tasks[i].goal_yaw);
    CHECK(tasks_back[i].environment_id == tasks[i].environment_id);
  }

  fs::remove(dir / "records.jsonl");
  append_records(dir / "records.jsonl", {records.begin(), records.begin() + 3});
  append_records(dir / "records.jsonl", {records.begin() + 3, records.end()});
  const auto back = load_records(dir / "records.jsonl");
  REQUIRE(back.size() == records.size());
  for (size_t i = 0; i < records.size(); ++i) {
    CHECK(back[i].initializer == records[i].initializer);
    CHECK(back[i].layout_hash == records[i].layout_hash);
    CHECK(back[i].converged == records[i].converged);
    CHECK(back[i].iterations == records[i].iterations);
    CHECK(back[i].cost == records[i].cost);  // exact double round trip
    CHECK(back[i].violation == records[i].violation);
    CHECK(back[i].executable_pass == records[i].executable_pass);
    CHECK(back[i].solution == records[i].solution);
  }
}

TEST_CASE("binary vectors check the layout hash") {
  const fs::path dir = temp_dir();
  const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(11, -2.0, 3.0);
  save_vector(dir / "v.bin", v, 0x1122334455667788u);
  CHECK(load_vector(dir / "v.bin", 0x1122334455667788u) == v);
  CHECK_THROWS(load_vector(dir / "v.bin", 0xdeadbeefu));

  // A truncated file fails loudly rather than returning garbage.
  std::ofstream(dir / "short.bin", std::ios::binary) << "LPVEC001";
  CHECK_THROWS(load_vector(dir / "short.bin", 0x1122334455667788u));
}

TEST_CASE("network files check the layout hash and keep a sidecar") {
  const fs::path dir = temp_dir();
  InitializerNet net({kTaskFeatureCount, 8, 12}, 3);
  save_net(dir / "n.net", net, 77, "single_pallet", "trot");
  const InitializerNet back = load_net(dir / "n.net", 77);
  CHECK(back.layer_sizes() == net.layer_sizes());
  CHECK_THROWS(load_net(dir / "n.net", 78));
  CHECK(fs::exists(dir / "n.net.json"));
}

TEST_CASE("cost statistics match hand-computed values") {
  std::vector<double> costs;
  for (int i = 1; i <= 100; ++i) costs.push_back(i);
  const CostStatistics s = cost_statistics(costs, 90.0);
  CHECK(s.count == 100);
  CHECK(s.median == doctest::Approx(50.5));
  CHECK(s.iqr == doctest::Approx(49.5));   // quantile-interpolated 75% - 25%
  CHECK(s.tail_fraction == doctest::Approx(0.11));  // 90..100 >= 90

  const CostStatistics flat = cost_statistics({3.0, 3.0, 3.0, 3.0}, 10.0);
  CHECK(flat.median == 3.0);
  CHECK(flat.iqr == 0.0);
  CHECK(flat.tail_fraction == 0.0);
}

TEST_CASE("histogram export writes one bin per row") {
  const fs::path dir = temp_dir();
  std::vector<double> costs;
  for (int i = 0; i < 90; ++i) costs.push_back(i % 9);
  export_histogram(dir / "h.csv", costs, 9);
  std::ifstream is(dir / "h.csv");
  std::string line;
  std::getline(is, line);
  CHECK(line == "bin_low,bin_high,count");
  int rows = 0, total = 0;
  while (std::getline(is, line)) {
    ++rows;
    total += std::stoi(line.substr(line.rfind(',') + 1));
  }
  CHECK(rows == 9);
  CHECK(total == 90);
}

TEST_CASE("run directories are created and reopened") {
  const fs::path root = temp_dir() / "runs";
  fs::remove_all(root);
  CHECK_THROWS(RunPaths::Open(root, "demo"));
  const RunPaths created = RunPaths::Create(root, "demo");
  CHECK(fs::is_directory(created.nets_dir));
  CHECK(fs::is_directory(created.histograms_dir));
  save_tasks(created.tasks_file, {Task{}});  // Open requires a task set
  const RunPaths opened = RunPaths::Open(root, "demo");
  CHECK(opened.tasks_file == created.tasks_file);
  CHECK(opened.records_file == created.records_file);
}

TEST_CASE("task space validation rejects inverted ranges") {
  TaskSpace space;
  space.x_range = {0.5, -0.5};
  CHECK_THROWS_AS(space.validate(), std::invalid_argument);
}
