#include "natsel/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "natsel/csv.hpp"

namespace natsel {

double quantile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw std::invalid_argument("quantile of empty data");
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

std::vector<ClassScoreStats> ns_distribution(std::span<const double> scores, std::span<const int> labels,
                                             std::size_t num_classes) {
  if (scores.size() != labels.size()) throw std::invalid_argument("ns_distribution: scores and labels differ in length");
  std::vector<std::vector<double>> per_class(num_classes);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= num_classes) {
      throw std::out_of_range("ns_distribution: label " + std::to_string(labels[i]) + " out of range");
    }
    per_class[static_cast<std::size_t>(labels[i])].push_back(scores[i]);
  }
  std::vector<ClassScoreStats> out(num_classes);
  for (std::size_t k = 0; k < num_classes; ++k) {
    auto& v = per_class[k];
    ClassScoreStats& st = out[k];
    st.class_id = k;
    st.count = v.size();
    if (v.empty()) continue;
    std::sort(v.begin(), v.end());
    st.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    st.min = v.front();
    st.max = v.back();
    st.q1 = quantile_sorted(v, 0.25);
    st.median = quantile_sorted(v, 0.5);
    st.q3 = quantile_sorted(v, 0.75);
  }
  return out;
}

LinearFit linear_correlation(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw std::invalid_argument("linear_correlation: xs and ys differ in length");
  if (xs.size() < 2) throw std::invalid_argument("linear_correlation: need at least 2 points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0) throw std::invalid_argument("linear_correlation: zero variance in x, correlation undefined");
  if (syy == 0.0) throw std::domain_error("linear_correlation: zero variance in y, correlation undefined");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r = sxy / std::sqrt(sxx * syy);
  return fit;
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  return linear_correlation(rx, ry).r;
}

CorrelationReport correlation_report(std::span<const ClassScoreStats> distribution,
                                     std::span<const std::size_t> class_counts,
                                     std::span<const double> class_accuracy) {
  if (class_counts.size() != distribution.size() || class_accuracy.size() != distribution.size()) {
    throw std::invalid_argument("correlation_report: per-class inputs differ in length");
  }
  CorrelationReport report;
  std::vector<double> counts, accs, scores_for_counts, scores_for_accs;
  for (std::size_t k = 0; k < distribution.size(); ++k) {
    const ClassScoreStats& st = distribution[k];
    ClassRow row{k, class_counts[k], st.count, st.empty() ? std::numeric_limits<double>::quiet_NaN() : st.mean,
                 class_accuracy[k]};
    report.rows.push_back(row);
    if (st.count < kMinScoresPerClass) continue;
    counts.push_back(static_cast<double>(row.sample_count));
    scores_for_counts.push_back(row.mean_score);
    if (!std::isnan(row.accuracy)) {
      accs.push_back(row.accuracy);
      scores_for_accs.push_back(row.mean_score);
    }
  }
  auto fit = [](const std::string& axis, const std::vector<double>& xs, const std::vector<double>& ys) {
    FitOutcome out{axis, std::nullopt, ""};
    try {
      out.fit = linear_correlation(xs, ys);
    } catch (const std::exception& e) {
      out.error = e.what();
    }
    return out;
  };
  report.count_fit = fit("count", counts, scores_for_counts);
  report.accuracy_fit = fit("accuracy", accs, scores_for_accs);
  return report;
}

void write_box_csv(std::ostream& out, std::span<const ClassScoreStats> distribution) {
  out << "class,count,min,q1,median,q3,max,mean\n";
  for (const ClassScoreStats& st : distribution) {
    out << st.class_id << ',' << st.count;
    if (st.empty()) {
      out << ",,,,,,\n";  // empty class: no statistics
      continue;
    }
    out << ',' << format_number(st.min) << ',' << format_number(st.q1) << ',' << format_number(st.median) << ','
        << format_number(st.q3) << ',' << format_number(st.max) << ',' << format_number(st.mean) << '\n';
  }
}

void write_scatter_csv(std::ostream& out, const CorrelationReport& report) {
  out << "series,class,x,y\n";
  for (const ClassRow& row : report.rows) {
    if (row.score_count < kMinScoresPerClass) continue;
    out << "count," << row.class_id << ',' << row.sample_count << ',' << format_number(row.mean_score) << '\n';
  }
  for (const ClassRow& row : report.rows) {
    if (row.score_count < kMinScoresPerClass || std::isnan(row.accuracy)) continue;
    out << "accuracy," << row.class_id << ',' << format_number(row.accuracy) << ',' << format_number(row.mean_score)
        << '\n';
  }
}

void write_fit_csv(std::ostream& out, const CorrelationReport& report) {
  out << "axis,slope,intercept,r,status\n";
  for (const FitOutcome* f : {&report.count_fit, &report.accuracy_fit}) {
    out << f->axis << ',';
    if (f->fit) {
      out << format_number(f->fit->slope) << ',' << format_number(f->fit->intercept) << ','
          << format_number(f->fit->r) << ",ok\n";
    } else {
      std::string reason = f->error;
      std::replace(reason.begin(), reason.end(), ',', ';');
      out << ",,," << reason << '\n';
    }
  }
}

void write_class_csv(std::ostream& out, const CorrelationReport& report) {
  out << "class,sample_count,score_count,mean_score,accuracy\n";
  for (const ClassRow& row : report.rows) {
    out << row.class_id << ',' << row.sample_count << ',' << row.score_count << ',' << format_number(row.mean_score)
        << ',' << format_number(row.accuracy) << '\n';
  }
}

}  // namespace natsel
