#include "tridetect/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <map>
#include <numeric>

#include "tridetect/errors.hpp"

namespace tridetect {
namespace {

struct ClassCounts {
  std::size_t real = 0;
  std::size_t fake = 0;
};

ClassCounts count_classes(std::span<const ScoredSample> s) {
  ClassCounts c;
  for (const auto& x : s) {
    require(std::isfinite(x.score), "metrics: non-finite score");
    (x.label == 1 ? c.fake : c.real)++;
  }
  return c;
}

ClassCounts require_both(std::span<const ScoredSample> s, const char* metric) {
  const auto c = count_classes(s);
  if (c.real == 0 || c.fake == 0)
    throw UndefinedMetric(std::string(metric) + ": needs both real and fake samples");
  return c;
}

// Groups of equal score, ordered by score (ascending or descending).
struct ScoreGroup {
  double score;
  std::size_t real = 0;
  std::size_t fake = 0;
};

std::vector<ScoreGroup> group_scores(std::span<const ScoredSample> s, bool descending) {
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return descending ? s[a].score > s[b].score : s[a].score < s[b].score;
  });
  std::vector<ScoreGroup> groups;
  for (std::size_t i : order) {
    if (groups.empty() || groups.back().score != s[i].score) groups.push_back({s[i].score});
    (s[i].label == 1 ? groups.back().fake : groups.back().real)++;
  }
  return groups;
}

std::vector<const ScoredSample*> eligible_clustered(std::span<const ScoredSample> s) {
  std::vector<const ScoredSample*> out;
  for (const auto& x : s)
    if (x.label == 1 && x.family != 255 && x.cluster) out.push_back(&x);
  return out;
}

std::string format_double(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

double auc(std::span<const ScoredSample> s) {
  const auto c = require_both(s, "auc");
  // Twice the Mann-Whitney count keeps ties integral.
  std::uint64_t twice = 0;
  std::uint64_t real_below = 0;
  for (const auto& g : group_scores(s, false)) {
    twice += 2 * g.fake * real_below + g.fake * g.real;
    real_below += g.real;
  }
  return static_cast<double>(twice) /
         (2.0 * static_cast<double>(c.real) * static_cast<double>(c.fake));
}

double acc(std::span<const ScoredSample> s, double threshold) {
  require(!s.empty(), "acc: no samples");
  std::size_t correct = 0;
  for (const auto& x : s) correct += ((x.score >= threshold) == (x.label == 1)) ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(s.size());
}

double eer(std::span<const ScoredSample> s) {
  const auto c = require_both(s, "eer");
  const double nr = static_cast<double>(c.real);
  const double nf = static_cast<double>(c.fake);
  std::size_t real_below = 0;
  std::size_t fake_below = 0;
  double best_gap = INFINITY;
  double best = 0.0;
  for (const auto& g : group_scores(s, false)) {
    const double fpr = static_cast<double>(c.real - real_below) / nr;
    const double fnr = static_cast<double>(fake_below) / nf;
    const double gap = std::abs(fpr - fnr);
    if (gap < best_gap) {
      best_gap = gap;
      best = 0.5 * (fpr + fnr);
    }
    real_below += g.real;
    fake_below += g.fake;
  }
  return best;
}

double ap(std::span<const ScoredSample> s) {
  const auto c = require_both(s, "ap");
  const double nf = static_cast<double>(c.fake);
  std::size_t tp = 0;
  std::size_t fp = 0;
  double prev_recall = 0.0;
  double total = 0.0;
  for (const auto& g : group_scores(s, true)) {
    tp += g.fake;
    fp += g.real;
    const double recall = static_cast<double>(tp) / nf;
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    total += (recall - prev_recall) * precision;
    prev_recall = recall;
  }
  return total;
}

double cluster_purity(std::span<const ScoredSample> s) {
  const auto rows = eligible_clustered(s);
  if (rows.empty()) throw UndefinedMetric("purity: no fake samples with family and cluster");
  std::map<int, std::map<int, std::size_t>> table;
  for (const auto* x : rows) table[*x->cluster][x->family]++;
  std::size_t hit = 0;
  for (const auto& [cluster, fam] : table) {
    std::size_t best = 0;
    for (const auto& [f, n] : fam) best = std::max(best, n);
    hit += best;
  }
  return static_cast<double>(hit) / static_cast<double>(rows.size());
}

double nmi(std::span<const ScoredSample> s) {
  const auto rows = eligible_clustered(s);
  if (rows.empty()) throw UndefinedMetric("nmi: no fake samples with family and cluster");
  const double n = static_cast<double>(rows.size());
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> by_cluster, by_family;
  for (const auto* x : rows) {
    joint[{*x->cluster, x->family}] += 1.0;
    by_cluster[*x->cluster] += 1.0;
    by_family[x->family] += 1.0;
  }
  auto entropy = [n](const std::map<int, double>& m) {
    double h = 0.0;
    for (const auto& [k, c] : m) h -= (c / n) * std::log(c / n);
    return h;
  };
  const double hc = entropy(by_cluster);
  const double hf = entropy(by_family);
  if (hc <= 0.0 || hf <= 0.0) return (hc <= 0.0 && hf <= 0.0) ? 1.0 : 0.0;
  double mi = 0.0;
  for (const auto& [key, c] : joint)
    mi += (c / n) * std::log(n * c / (by_cluster[key.first] * by_family[key.second]));
  return std::clamp(mi / std::sqrt(hc * hf), 0.0, 1.0);
}

std::vector<CurvePoint> roc_curve(std::span<const ScoredSample> s) {
  const auto c = require_both(s, "roc");
  std::vector<CurvePoint> pts{{0.0, 0.0, INFINITY}};
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const auto& g : group_scores(s, true)) {
    tp += g.fake;
    fp += g.real;
    pts.push_back({static_cast<double>(fp) / static_cast<double>(c.real),
                   static_cast<double>(tp) / static_cast<double>(c.fake), g.score});
  }
  return pts;
}

std::vector<CurvePoint> pr_curve(std::span<const ScoredSample> s) {
  const auto c = require_both(s, "pr");
  std::vector<CurvePoint> pts;
  std::size_t tp = 0;
  std::size_t fp = 0;
  for (const auto& g : group_scores(s, true)) {
    tp += g.fake;
    fp += g.real;
    pts.push_back({static_cast<double>(tp) / static_cast<double>(c.fake),
                   static_cast<double>(tp) / static_cast<double>(tp + fp), g.score});
  }
  return pts;
}

std::vector<MetricRow> metric_report(std::span<const ScoredSample> s) {
  std::vector<MetricRow> rows;
  auto guarded = [&](const char* name, auto fn) {
    try {
      rows.push_back({name, fn(s), ""});
    } catch (const UndefinedMetric& e) {
      rows.push_back({name, std::nullopt, e.what()});
    }
  };
  rows.push_back({"acc", acc(s), ""});
  guarded("auc", [](auto x) { return auc(x); });
  guarded("eer", [](auto x) { return eer(x); });
  guarded("ap", [](auto x) { return ap(x); });
  const bool families_known = std::any_of(s.begin(), s.end(), [](const ScoredSample& x) {
    return x.label == 1 && x.family != 255;
  });
  if (families_known) {
    guarded("purity", [](auto x) { return cluster_purity(x); });
    guarded("nmi", [](auto x) { return nmi(x); });
  }
  return rows;
}

std::string metrics_csv(const std::string& dataset, std::span<const MetricRow> rows) {
  std::string out = "dataset,metric,value\n";
  for (const auto& r : rows)
    out += dataset + "," + r.metric + "," + (r.value ? format_double(*r.value) : "undefined") +
           "\n";
  return out;
}

std::string metrics_text(const std::string& dataset, std::span<const MetricRow> rows) {
  std::string out = "metrics for " + dataset + "\n";
  std::size_t width = 0;
  for (const auto& r : rows) width = std::max(width, r.metric.size());
  for (const auto& r : rows) {
    char buf[64];
    if (r.value)
      std::snprintf(buf, sizeof buf, "%.6f", *r.value);
    else
      std::snprintf(buf, sizeof buf, "undefined");
    out += "  " + r.metric + std::string(width + 2 - r.metric.size(), ' ') +
           buf + (r.note.empty() ? "" : "  (" + r.note + ")") + "\n";
  }
  return out;
}

}  // namespace tridetect
