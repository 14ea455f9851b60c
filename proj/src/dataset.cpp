#include "locoplan/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace locoplan {
namespace {

using nlohmann::json;

constexpr char kVectorMagic[8] = {'L', 'P', 'V', 'E', 'C', '0', '0', '1'};
constexpr char kNetMagic[8] = {'L', 'P', 'N', 'E', 'T', '0', '0', '1'};
constexpr uint32_t kFormatVersion = 1;

json task_to_json(const Task& t) {
  return json{{"initial_base_position",
               {t.initial_base_position.x(), t.initial_base_position.y(),
                t.initial_base_position.z()}},
              {"initial_yaw", t.initial_yaw},
              {"goal_base_position",
               {t.goal_base_position.x(), t.goal_base_position.y(),
                t.goal_base_position.z()}},
              {"goal_yaw", t.goal_yaw},
              {"environment_id", t.environment_id}};
}

Eigen::Vector3d vec3_from(const json& a) {
  if (!a.is_array() || a.size() != 3) {
    throw std::runtime_error("expected a 3-element array");
  }
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

Task task_from_json(const json& j) {
  Task t;
  t.initial_base_position = vec3_from(j.at("initial_base_position"));
  t.initial_yaw = j.at("initial_yaw").get<double>();
  t.goal_base_position = vec3_from(j.at("goal_base_position"));
  t.goal_yaw = j.at("goal_yaw").get<double>();
  t.environment_id = j.at("environment_id").get<std::string>();
  return t;
}

std::ofstream open_out(const std::filesystem::path& path, bool append,
                       bool binary = false) {
  std::ios_base::openmode mode = append ? std::ios::app : std::ios::trunc;
  if (binary) mode |= std::ios::binary;
  std::ofstream os(path, mode);
  if (!os) {
    throw std::runtime_error("cannot open for writing: " + path.string());
  }
  return os;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary = false) {
  std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
  if (!is) {
    throw std::runtime_error("cannot open for reading: " + path.string());
  }
  return is;
}

void write_header(std::ostream& os, const char magic[8], uint64_t layout_hash) {
  os.write(magic, 8);
  os.write(reinterpret_cast<const char*>(&kFormatVersion), sizeof(uint32_t));
  os.write(reinterpret_cast<const char*>(&layout_hash), sizeof(uint64_t));
}

uint64_t read_header(std::istream& is, const char magic[8],
                     const std::string& what) {
  char buf[8];
  is.read(buf, 8);
  if (!is || std::memcmp(buf, magic, 8) != 0) {
    throw std::runtime_error("bad magic in " + what + " file");
  }
  uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(uint32_t));
  if (!is || version != kFormatVersion) {
    throw std::runtime_error("unsupported " + what + " file version");
  }
  uint64_t hash = 0;
  is.read(reinterpret_cast<char*>(&hash), sizeof(uint64_t));
  if (!is) throw std::runtime_error("truncated " + what + " header");
  return hash;
}

}  // namespace

TaskSpace TaskSpace::ForTerrain(const Terrain& terrain) {
  TaskSpace s;
  s.environment_id = terrain.name();
  switch (terrain.kind()) {
    case TerrainKind::kFlat:
      // No step to climb: same approach box, goal on the ground plane.
      s.goal_position = {0.6, 0.0, 0.42};
      break;
    case TerrainKind::kSinglePallet:
      s.goal_position = {0.6, 0.0,
                         0.42 + terrain.height_at(0.6, 0.0)};
      break;
    case TerrainKind::kDoublePallet:
      s.goal_position = {0.8, 0.0,
                         0.42 + terrain.height_at(0.8, 0.0)};
      break;
  }
  return s;
}

void TaskSpace::validate() const {
  if (x_range[0] > x_range[1] || y_range[0] > y_range[1] ||
      yaw_range[0] > yaw_range[1]) {
    throw std::invalid_argument("task-space ranges must be non-empty");
  }
  if (start_height <= 0.0) {
    throw std::invalid_argument("start_height must be positive");
  }
}

std::vector<Task> sample_tasks(const TaskSpace& space, int n, uint64_t seed) {
  if (n < 1) throw std::invalid_argument("sample_tasks: n must be >= 1");
  space.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(space.x_range[0], space.x_range[1]);
  std::uniform_real_distribution<double> uy(space.y_range[0], space.y_range[1]);
  std::uniform_real_distribution<double> uyaw(space.yaw_range[0],
                                              space.yaw_range[1]);
  std::vector<Task> out;
  out.reserve(n);
  for (int i = 0; i < n; ++i) {
    Task t;
    t.initial_base_position = {ux(rng),
                               space.goal_position.y() + uy(rng),
                               space.start_height};
    t.initial_yaw = uyaw(rng);
    t.goal_base_position = space.goal_position;
    t.goal_yaw = space.goal_yaw;
    t.environment_id = space.environment_id;
    out.push_back(std::move(t));
  }
  return out;
}

void save_tasks(const std::filesystem::path& path,
                const std::vector<Task>& tasks) {
  std::ofstream os = open_out(path, /*append=*/false);
  for (const Task& t : tasks) os << task_to_json(t).dump() << '\n';
}

std::vector<Task> load_tasks(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  std::vector<Task> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(task_from_json(json::parse(line)));
  }
  return out;
}

void append_records(const std::filesystem::path& path,
                    const std::vector<ExperimentRecord>& records) {
  std::ofstream os = open_out(path, /*append=*/true);
  for (const ExperimentRecord& r : records) {
    json j{{"task", task_to_json(r.task)},
           {"initializer", r.initializer},
           {"variant", r.variant},
           {"budget", r.budget},
           {"layout_hash", r.layout_hash},
           {"converged", r.converged},
           {"iterations", r.iterations},
           {"cost", r.cost},
           {"violation", r.violation},
           {"wall_time_ms", r.wall_time_ms},
           {"strict_pass", r.strict_pass},
           {"executable_pass", r.executable_pass},
           {"position_drift", r.position_drift}};
    j["solution"] = std::vector<double>(
        r.solution.data(), r.solution.data() + r.solution.size());
    os << j.dump() << '\n';
  }
}

std::vector<ExperimentRecord> load_records(const std::filesystem::path& path) {
  std::ifstream is = open_in(path);
  std::vector<ExperimentRecord> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    ExperimentRecord r;
    r.task = task_from_json(j.at("task"));
    r.initializer = j.at("initializer").get<std::string>();
    r.variant = j.at("variant").get<std::string>();
    r.budget = j.at("budget").get<int>();
    r.layout_hash = j.at("layout_hash").get<uint64_t>();
    r.converged = j.at("converged").get<bool>();
    r.iterations = j.at("iterations").get<int>();
    r.cost = j.at("cost").get<double>();
    r.violation = j.at("violation").get<double>();
    r.wall_time_ms = j.at("wall_time_ms").get<double>();
    r.strict_pass = j.at("strict_pass").get<bool>();
    r.executable_pass = j.at("executable_pass").get<bool>();
    r.position_drift = j.at("position_drift").get<double>();
    const auto& sol = j.at("solution");
    r.solution.resize(sol.size());
    for (size_t i = 0; i < sol.size(); ++i) r.solution[i] = sol[i].get<double>();
    out.push_back(std::move(r));
  }
  return out;
}

void save_vector(const std::filesystem::path& path, const Eigen::VectorXd& x,
                 uint64_t layout_hash) {
  std::ofstream os = open_out(path, /*append=*/false, /*binary=*/true);
  write_header(os, kVectorMagic, layout_hash);
  const uint64_t n = static_cast<uint64_t>(x.size());
  os.write(reinterpret_cast<const char*>(&n), sizeof(uint64_t));
  os.write(reinterpret_cast<const char*>(x.data()),
           static_cast<std::streamsize>(n * sizeof(double)));
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Eigen::VectorXd load_vector(const std::filesystem::path& path,
                            uint64_t expected_layout_hash) {
  std::ifstream is = open_in(path, /*binary=*/true);
  const uint64_t hash = read_header(is, kVectorMagic, "vector");
  if (hash != expected_layout_hash) {
    throw std::runtime_error("layout mismatch loading " + path.string());
  }
  uint64_t n = 0;
  is.read(reinterpret_cast<char*>(&n), sizeof(uint64_t));
  Eigen::VectorXd x(static_cast<Eigen::Index>(n));
  is.read(reinterpret_cast<char*>(x.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!is) throw std::runtime_error("truncated vector file " + path.string());
  return x;
}

void save_net(const std::filesystem::path& path, const InitializerNet& net,
              uint64_t layout_hash, const std::string& environment_id,
              const std::string& gait) {
  {
    std::ofstream os = open_out(path, /*append=*/false, /*binary=*/true);
    write_header(os, kNetMagic, layout_hash);
    net.save(os);
    if (!os) throw std::runtime_error("failed writing " + path.string());
  }
  json sidecar{{"format_version", kFormatVersion},
               {"layout_hash", layout_hash},
               {"environment_id", environment_id},
               {"gait", gait},
               {"layer_sizes", net.layer_sizes()}};
  std::filesystem::path side = path;
  side += ".json";
  open_out(side, /*append=*/false) << sidecar.dump(2) << '\n';
}

InitializerNet load_net(const std::filesystem::path& path,
                        uint64_t expected_layout_hash) {
  std::ifstream is = open_in(path, /*binary=*/true);
  const uint64_t hash = read_header(is, kNetMagic, "net");
  if (hash != expected_layout_hash) {
    throw std::runtime_error("layout mismatch loading " + path.string());
  }
  return InitializerNet::load(is);
}

CostStatistics cost_statistics(const std::vector<double>& costs,
                               double g_max) {
  if (costs.empty()) {
    throw std::invalid_argument("cost_statistics: need at least one cost");
  }
  std::vector<double> sorted = costs;
  std::sort(sorted.begin(), sorted.end());
  const auto quantile = [&sorted](double q) {
    const double pos = q * (static_cast<double>(sorted.size()) - 1.0);
    const size_t lo = static_cast<size_t>(std::floor(pos));
    const size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
  };
  CostStatistics s;
  s.count = static_cast<int>(sorted.size());
  s.median = quantile(0.5);
  s.iqr = quantile(0.75) - quantile(0.25);
  const auto tail = std::lower_bound(sorted.begin(), sorted.end(), g_max);
  s.tail_fraction = static_cast<double>(sorted.end() - tail) /
                    static_cast<double>(sorted.size());
  return s;
}

void export_histogram(const std::filesystem::path& path,
                      const std::vector<double>& costs, int bins) {
  if (costs.empty() || bins < 1) {
    throw std::invalid_argument("export_histogram: empty input");
  }
  const auto [mn_it, mx_it] = std::minmax_element(costs.begin(), costs.end());
  const double lo = *mn_it;
  const double width = std::max(*mx_it - lo, 1e-12) / bins;
  std::vector<int> counts(bins, 0);
  for (const double c : costs) {
    const int b = std::min(static_cast<int>((c - lo) / width), bins - 1);
    counts[std::max(b, 0)]++;
  }
  std::ofstream os = open_out(path, /*append=*/false);
  os << "bin_low,bin_high,count\n";
  os.precision(17);
  for (int b = 0; b < bins; ++b) {
    os << lo + b * width << ',' << lo + (b + 1) * width << ',' << counts[b]
       << '\n';
  }
}

RunPaths RunPaths::Create(const std::filesystem::path& runs_root,
                          const std::string& name) {
  RunPaths p;
  p.root = runs_root / name;
  p.tasks_file = p.root / "tasks.jsonl";
  p.records_file = p.root / "records.jsonl";
  p.nets_dir = p.root / "nets";
  p.histograms_dir = p.root / "histograms";
  std::filesystem::create_directories(p.nets_dir);
  std::filesystem::create_directories(p.histograms_dir);
  return p;
}

RunPaths RunPaths::Open(const std::filesystem::path& runs_root,
                        const std::string& name) {
  RunPaths p = Create(runs_root, name);
  if (!std::filesystem::exists(p.tasks_file)) {
    throw std::runtime_error("run has no tasks file: " +
                             p.tasks_file.string());
  }
  return p;
}

}  // namespace locoplan
