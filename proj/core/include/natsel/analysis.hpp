#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace natsel {

// Order statistics of the NS scores of one class. count == 0 marks a class
// with no scores; its other fields are meaningless and never written.
struct ClassScoreStats {
  std::size_t class_id = 0;
  std::size_t count = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double min = 0.0;
  double max = 0.0;

  bool empty() const { return count == 0; }
};

// Quantile of sorted data by linear interpolation between closest ranks:
// position h = (n - 1) * p.
double quantile_sorted(std::span<const double> sorted, double p);

std::vector<ClassScoreStats> ns_distribution(std::span<const double> scores, std::span<const int> labels,
                                             std::size_t num_classes);

struct LinearFit {
  double r = 0.0;
  double slope = 0.0;
  double intercept = 0.0;
};

// Least-squares line y = slope * x + intercept and Pearson r.
// Throws std::invalid_argument for fewer than 2 points or zero variance in xs
// (and std::domain_error for zero variance in ys, where r is undefined).
LinearFit linear_correlation(std::span<const double> xs, std::span<const double> ys);

// 1-based ranks in ascending order; ties share their average rank.
std::vector<double> average_ranks(std::span<const double> values);
double spearman(std::span<const double> xs, std::span<const double> ys);

struct ClassRow {
  std::size_t class_id = 0;
  std::size_t sample_count = 0;  // training samples of the class
  std::size_t score_count = 0;   // NS scores observed
  double mean_score = 0.0;
  double accuracy = 0.0;         // NaN if unknown
};

struct FitOutcome {
  std::string axis;  // "count" or "accuracy"; y is always the class mean NS score
  std::optional<LinearFit> fit;
  std::string error;  // why fit is absent
};

struct CorrelationReport {
  std::vector<ClassRow> rows;
  FitOutcome count_fit;
  FitOutcome accuracy_fit;
};

// Classes with fewer than this many NS scores are left out of the fits.
inline constexpr std::size_t kMinScoresPerClass = 2;

CorrelationReport correlation_report(std::span<const ClassScoreStats> distribution,
                                     std::span<const std::size_t> class_counts,
                                     std::span<const double> class_accuracy);

// box: class,count,min,q1,median,q3,max,mean
void write_box_csv(std::ostream& out, std::span<const ClassScoreStats> distribution);
// scatter: series,class,x,y  (series "count" and "accuracy")
void write_scatter_csv(std::ostream& out, const CorrelationReport& report);
// fit: axis,slope,intercept,r,status
void write_fit_csv(std::ostream& out, const CorrelationReport& report);
// class,sample_count,score_count,mean_score,accuracy
void write_class_csv(std::ostream& out, const CorrelationReport& report);

}  // namespace natsel
