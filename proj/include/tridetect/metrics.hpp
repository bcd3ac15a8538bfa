#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tridetect {

struct ScoredSample {
  double score = 0.0;        // fake probability
  std::uint8_t label = 0;    // 0 real, 1 fake
  std::uint8_t family = 255;
  std::optional<int> cluster;
};

// Mann-Whitney: P(score_fake > score_real) + 0.5 P(tie), via a sorted sweep.
double auc(std::span<const ScoredSample> s);

// Fraction correct when predicting fake for score >= threshold.
double acc(std::span<const ScoredSample> s, double threshold = 0.5);

// Over thresholds t in the set of observed scores (fake iff score >= t), picks
// the t minimizing |FPR - FNR| (ties to the lower t) and returns (FPR+FNR)/2.
double eer(std::span<const ScoredSample> s);

// sum_k (R_k - R_{k-1}) P_k over descending distinct-score thresholds.
double ap(std::span<const ScoredSample> s);

// Fake samples with a known family and an assigned cluster.
double cluster_purity(std::span<const ScoredSample> s);
// I(cluster; family) / sqrt(H(cluster) H(family)), natural logs.
double nmi(std::span<const ScoredSample> s);

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
  double threshold = 0.0;
};
// (FPR, TPR) from (0,0) to (1,1).
std::vector<CurvePoint> roc_curve(std::span<const ScoredSample> s);
// (recall, precision) per distinct threshold, descending score.
std::vector<CurvePoint> pr_curve(std::span<const ScoredSample> s);

struct MetricRow {
  std::string metric;
  std::optional<double> value;  // empty when undefined for this data
  std::string note;
};

// ACC/AUC/EER/AP plus purity/NMI when any fake sample has a known family.
std::vector<MetricRow> metric_report(std::span<const ScoredSample> s);

std::string metrics_csv(const std::string& dataset, std::span<const MetricRow> rows);
std::string metrics_text(const std::string& dataset, std::span<const MetricRow> rows);

}  // namespace tridetect
