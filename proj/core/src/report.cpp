#include "soar/report.hpp"

#include <algorithm>
#include <cstdio>
#include <map>

#include "json_io.hpp"
#include "soar/harness.hpp"
#include "soar/serialize.hpp"

namespace soar {

namespace fs = std::filesystem;

namespace {

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

class Problems {
 public:
  void add(std::string what) { items_.push_back(std::move(what)); }
  void raise_if_any(const std::string& headline) const {
    if (items_.empty()) return;
    std::string msg = headline;
    for (const auto& i : items_) msg += "\n  " + i;
    throw ConfigError(msg);
  }

 private:
  std::vector<std::string> items_;
};

json load_checked(const fs::path& path, const std::string& hash, Problems& problems) {
  if (!fs::exists(path)) {
    problems.add("missing " + path.string());
    return nullptr;
  }
  auto j = parse_json(read_file(path), path.string().c_str());
  if (j.at("run").at("config_hash").get<std::string>() != hash) {
    problems.add("different configuration: " + path.string());
    return nullptr;
  }
  return j;
}

std::vector<std::string> eval_arms(const fs::path& root) {
  std::vector<std::string> arms;
  const auto dir = root / "eval";
  if (!fs::exists(dir)) return arms;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory()) arms.push_back(e.path().filename().string());
  std::sort(arms.begin(), arms.end());
  // hard-only first so deltas read naturally
  std::stable_partition(arms.begin(), arms.end(), [](const std::string& a) { return a == "hard-only"; });
  return arms;
}

}  // namespace

ReportTables cmd_report(const RunConfig& cfg) {
  const ArtifactLayout layout{cfg.out_dir};
  const auto hash = config_hash(cfg);
  Problems problems;
  ReportTables tables;

  // pass@k per evaluation arm
  struct ArmRuns {
    std::vector<std::vector<double>> pass;  // per run, aligned with ks
    std::vector<double> greedy;
  };
  std::map<std::string, ArmRuns> runs;
  const auto arms = eval_arms(layout.root);
  for (const auto& arm : arms) {
    auto& r = runs[arm];
    auto collect = [&](std::optional<std::uint64_t> t, std::uint64_t s) {
      const auto j = load_checked(layout.eval_dir(arm, t, s) / "result.json", hash, problems);
      if (j.is_null()) return;
      if (j.at("ks").get<std::vector<int>>() != cfg.eval.ks) {
        problems.add("different k list: " + layout.eval_dir(arm, t, s).string());
        return;
      }
      r.pass.push_back(j.at("pass_at_k").get<std::vector<double>>());
      r.greedy.push_back(j.at("greedy_accuracy").get<double>());
    };
    for (auto s : cfg.seeds.student) {
      if (arm == "hard-only")
        collect(std::nullopt, s);
      else
        for (auto t : cfg.seeds.teacher) collect(t, s);
    }
  }
  problems.raise_if_any("report: incomplete or mismatched runs:");

  std::optional<std::vector<double>> hard_median;
  for (const auto& arm : arms) {
    const auto& r = runs.at(arm);
    std::vector<double> medians;
    for (std::size_t q = 0; q < cfg.eval.ks.size(); ++q) {
      std::vector<double> col;
      for (const auto& p : r.pass) col.push_back(p[q]);
      PassAtKRow row;
      row.arm = arm;
      row.k = cfg.eval.ks[q];
      row.median = median(col);
      row.stddev = population_stddev(col);
      row.runs = col.size();
      medians.push_back(row.median);
      tables.pass_at_k.push_back(row);
    }
    if (arm == "hard-only") hard_median = medians;
    tables.accuracy.push_back({arm, median(r.greedy), population_stddev(r.greedy), r.greedy.size()});
  }
  if (hard_median)
    for (auto& row : tables.pass_at_k) {
      const auto q = static_cast<std::size_t>(
          std::find(cfg.eval.ks.begin(), cfg.eval.ks.end(), row.k) - cfg.eval.ks.begin());
      row.delta = row.median - (*hard_median)[q];
    }

  // diversity of each teacher arm's samples and of the promotion questions
  std::string rewards_jsonl;
  std::string promotions_jsonl;
  auto diversity_of = [&](const std::string& arm, auto&& items_for_seed) {
    std::vector<double> vendi;
    std::vector<double> cosine;
    std::size_t items = 0;
    for (auto t : cfg.seeds.teacher) {
      const auto pairs = items_for_seed(t);
      if (pairs.size() < 2) continue;
      const auto x = item_embeddings(pairs);
      Rng rng = make_rng(derive_seed(cfg.seeds.pool, {0xd1, t, std::hash<std::string>{}(arm)}));
      vendi.push_back(vendi_bootstrap(x, 128, 100, rng).mean);
      cosine.push_back(pairwise_cosine_diversity(x));
      items += pairs.size();
    }
    if (vendi.empty()) return;
    tables.diversity.push_back(
        {arm, mean(vendi), population_stddev(vendi), mean(cosine), items, vendi.size()});
  };

  for (auto arm : {TeacherArm::soar, TeacherArm::intrinsic, TeacherArm::base_teacher}) {
    const auto name = to_string(arm);
    bool any = false;
    for (auto t : cfg.seeds.teacher) any = any || fs::exists(layout.teacher_dir(arm, t) / "samples.json");
    if (!any) continue;
    std::map<std::uint64_t, std::vector<QAPair>> samples;
    for (auto t : cfg.seeds.teacher) {
      const auto j = load_checked(layout.teacher_dir(arm, t) / "samples.json", hash, problems);
      if (!j.is_null()) samples[t] = j.at("pairs").get<std::vector<QAPair>>();
    }
    problems.raise_if_any("report: incomplete " + name + " samples:");
    diversity_of(name, [&](std::uint64_t t) { return samples.at(t); });

    if (arm == TeacherArm::base_teacher) continue;
    for (auto t : cfg.seeds.teacher) {
      const auto steps_path = layout.teacher_dir(arm, t) / "steps.jsonl";
      if (!fs::exists(steps_path)) continue;
      std::vector<int> promoted_at;
      for (const auto& line : read_lines(steps_path)) {
        const auto r = decode_step_report(line);
        rewards_jsonl += json{{"arm", name},         {"teacher_seed", t},
                              {"step", r.step},      {"mean_reward", mean(r.rewards)},
                              {"window_mean", r.window_mean}, {"promoted", r.promoted},
                              {"stage", r.stage},    {"vendi", r.vendi},
                              {"cosine_div", r.cosine_div}}
                             .dump() +
                         "\n";
        if (r.promoted) promoted_at.push_back(r.step);
      }
      if (arm == TeacherArm::soar)
        promotions_jsonl += json{{"teacher_seed", t}, {"promotion_steps", promoted_at}}.dump() + "\n";
    }
  }

  {
    std::map<std::uint64_t, std::vector<QAPair>> pq;
    for (auto t : cfg.seeds.teacher) {
      const auto path = layout.teacher_dir(TeacherArm::soar, t) / "pq.json";
      if (!fs::exists(path)) continue;
      const auto j = load_checked(path, hash, problems);
      if (j.is_null()) continue;
      auto& items = pq[t];
      for (const auto& ds : j.at("datasets").get<std::vector<CandidateDataset>>())
        items.insert(items.end(), ds.items.begin(), ds.items.end());
    }
    problems.raise_if_any("report: mismatched promotion questions:");
    if (!pq.empty()) diversity_of("pq", [&](std::uint64_t t) { return pq.count(t) ? pq.at(t) : std::vector<QAPair>{}; });
  }

  const auto dir = layout.report_dir();
  std::string csv = "arm,k,median,std,delta_vs_hard_only,runs\n";
  for (const auto& r : tables.pass_at_k)
    csv += r.arm + "," + std::to_string(r.k) + "," + fmt(r.median) + "," + fmt(r.stddev) + "," +
           (r.delta ? fmt(*r.delta) : "") + "," + std::to_string(r.runs) + "\n";
  write_file_atomic(dir / "pass_at_k.csv", csv);

  csv = "arm,greedy_median,greedy_std,runs\n";
  for (const auto& r : tables.accuracy)
    csv += r.arm + "," + fmt(r.median) + "," + fmt(r.stddev) + "," + std::to_string(r.runs) + "\n";
  write_file_atomic(dir / "accuracy.csv", csv);

  csv = "arm,vendi_mean,vendi_std,pairwise_cosine_div,items,teachers,embeddings\n";
  for (const auto& r : tables.diversity)
    csv += r.arm + "," + fmt(r.vendi_mean) + "," + fmt(r.vendi_stddev) + "," + fmt(r.cosine_div) + "," +
           std::to_string(r.items) + "," + std::to_string(r.teachers) + ",toy\n";
  write_file_atomic(dir / "diversity.csv", csv);

  write_file_atomic(dir / "teacher_rewards.jsonl", rewards_jsonl);
  write_file_atomic(dir / "promotions.jsonl", promotions_jsonl);
  return tables;
}

}  // namespace soar
