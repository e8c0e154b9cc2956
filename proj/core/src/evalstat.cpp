#include "sonotype/evalstat.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "sonotype/error.hpp"

namespace sonotype {

void ScoredPredictions::add(int label, std::span<const double> row) {
  if (num_classes == 0) num_classes = row.size();
  if (row.size() != num_classes) fail(Errc::invalid_argument, "score row length differs from num_classes");
  labels.push_back(label);
  scores.insert(scores.end(), row.begin(), row.end());
}

void ScoredPredictions::validate() const {
  if (scores.size() != labels.size() * num_classes) fail(Errc::invalid_argument, "scores are not samples x classes");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= num_classes) {
      fail(Errc::invalid_argument, "label " + std::to_string(y) + " outside [0, " + std::to_string(num_classes) + ")");
    }
  }
  for (double s : scores) {
    if (!std::isfinite(s)) fail(Errc::invalid_argument, "non-finite score");
  }
}

namespace {

void require_samples(const ScoredPredictions& preds) {
  if (preds.size() == 0) fail(Errc::empty_input, "no predictions");
  preds.validate();
}

}  // namespace

std::vector<int> predicted_classes(const ScoredPredictions& preds) {
  std::vector<int> out(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < preds.num_classes; ++k) {
      if (preds.score(i, k) > preds.score(i, best)) best = k;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

double accuracy(const ScoredPredictions& preds) {
  require_samples(preds);
  const auto predicted = predicted_classes(preds);
  std::uint64_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) correct += predicted[i] == preds.labels[i];
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

std::vector<double> auc_per_class(const ScoredPredictions& preds) {
  require_samples(preds);
  const std::size_t n = preds.size();
  std::vector<std::size_t> order(n);
  std::vector<double> out;
  for (std::size_t c = 0; c < preds.num_classes; ++c) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return preds.score(a, c) < preds.score(b, c); });
    double positive_rank_sum = 0.0;
    std::uint64_t positives = 0;
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && preds.score(order[j + 1], c) == preds.score(order[i], c)) ++j;
      const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (std::size_t t = i; t <= j; ++t) {
        if (static_cast<std::size_t>(preds.labels[order[t]]) == c) {
          positive_rank_sum += rank;
          ++positives;
        }
      }
      i = j + 1;
    }
    const std::uint64_t negatives = n - positives;
    if (positives == 0 || negatives == 0) {
      fail(Errc::degenerate_class, "class " + std::to_string(c) + " has " + std::to_string(positives) +
                                       " positives and " + std::to_string(negatives) + " negatives");
    }
    const double p = static_cast<double>(positives);
    out.push_back((positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives)));
  }
  return out;
}

double auc_multiclass(const ScoredPredictions& preds) {
  const auto per_class = auc_per_class(preds);
  return std::accumulate(per_class.begin(), per_class.end(), 0.0) / static_cast<double>(per_class.size());
}

double average_precision(const ScoredPredictions& preds, std::size_t cls) {
  require_samples(preds);
  if (cls >= preds.num_classes) fail(Errc::invalid_argument, "class index out of range");
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds.score(a, cls) > preds.score(b, cls); });
  double sum = 0.0;
  std::uint64_t hits = 0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (static_cast<std::size_t>(preds.labels[order[r]]) != cls) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(r + 1);
  }
  if (hits == 0) fail(Errc::degenerate_class, "class " + std::to_string(cls) + " has no positives");
  return sum / static_cast<double>(hits);
}

namespace {

std::vector<std::uint64_t> supports(const ScoredPredictions& preds) {
  std::vector<std::uint64_t> out(preds.num_classes, 0);
  for (int y : preds.labels) ++out[static_cast<std::size_t>(y)];
  return out;
}

std::vector<double> all_ap(const ScoredPredictions& preds) {
  std::vector<double> out;
  for (std::size_t c = 0; c < preds.num_classes; ++c) out.push_back(average_precision(preds, c));
  return out;
}

}  // namespace

double map_weighted(const ScoredPredictions& preds) {
  const auto ap = all_ap(preds);
  const auto w = supports(preds);
  return weighted_mean(ap, w);
}

double cmap(const ScoredPredictions& preds) {
  const auto ap = all_ap(preds);
  const std::vector<std::uint64_t> ones(ap.size(), 1);
  return weighted_mean(ap, ones);
}

double weighted_mean(std::span<const double> values, std::span<const std::uint64_t> weights) {
  if (values.size() != weights.size() || values.empty()) fail(Errc::invalid_argument, "weighted mean shape");
  std::uint64_t g = 0;
  for (auto w : weights) g = std::gcd(g, w);
  if (g == 0) fail(Errc::invalid_argument, "all weights are zero");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double w = static_cast<double>(weights[i] / g);
    num += w * values[i];
    den += w;
  }
  return num / den;
}

double mean_of_ratios(std::span<const std::uint64_t> numerators, std::span<const std::uint64_t> denominators) {
  if (numerators.size() != denominators.size() || numerators.empty()) fail(Errc::invalid_argument, "ratio shape");
  using u128 = unsigned __int128;
  constexpr u128 kLimit = u128(1) << 100;
  const std::size_t k = numerators.size();
  u128 lcm = 1;
  bool exact = true;
  for (auto q : denominators) {
    if (q == 0) continue;
    const u128 g = std::gcd(static_cast<std::uint64_t>(lcm % q), q);
    const u128 step = q / static_cast<std::uint64_t>(g);
    if (lcm > kLimit / step) {
      exact = false;
      break;
    }
    lcm *= step;
  }
  if (exact && lcm <= kLimit / k) {
    u128 num = 0;
    for (std::size_t i = 0; i < k; ++i) {
      if (denominators[i] == 0) continue;
      const u128 scaled = u128(numerators[i]) * (lcm / denominators[i]);
      if (scaled > kLimit || num > kLimit - scaled) {
        exact = false;
        break;
      }
      num += scaled;
    }
    if (exact) {
      return static_cast<double>(num) / static_cast<double>(lcm * k);
    }
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    if (denominators[i] != 0) sum += static_cast<double>(numerators[i]) / static_cast<double>(denominators[i]);
  }
  return sum / static_cast<double>(k);
}

std::vector<std::vector<std::uint64_t>> confusion_matrix(const ScoredPredictions& preds) {
  require_samples(preds);
  std::vector<std::vector<std::uint64_t>> m(preds.num_classes, std::vector<std::uint64_t>(preds.num_classes, 0));
  const auto predicted = predicted_classes(preds);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ++m[static_cast<std::size_t>(preds.labels[i])][static_cast<std::size_t>(predicted[i])];
  }
  return m;
}

std::vector<ConfusionCounts> one_vs_rest_counts(const std::vector<std::vector<std::uint64_t>>& m) {
  const std::size_t k = m.size();
  std::uint64_t total = 0;
  for (const auto& row : m) total = std::accumulate(row.begin(), row.end(), total);
  std::vector<ConfusionCounts> out(k);
  for (std::size_t c = 0; c < k; ++c) {
    auto& o = out[c];
    o.tp = m[c][c];
    for (std::size_t j = 0; j < k; ++j) {
      if (j == c) continue;
      o.fn += m[c][j];
      o.fp += m[j][c];
    }
    o.tn = total - o.tp - o.fn - o.fp;
  }
  return out;
}

namespace {

double ratio(std::uint64_t num, std::uint64_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

ClassMetrics class_metrics(const ConfusionCounts& c) {
  ClassMetrics m;
  m.support = c.tp + c.fn;
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  m.specificity = ratio(c.tn, c.tn + c.fp);
  m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
  return m;
}

MacroMetrics recall_specificity_f1(const ScoredPredictions& preds) {
  const auto counts = one_vs_rest_counts(confusion_matrix(preds));
  const std::size_t k = counts.size();
  std::vector<std::uint64_t> num(k), den(k);
  auto macro = [&](auto&& numer, auto&& denom) {
    for (std::size_t c = 0; c < k; ++c) {
      num[c] = numer(counts[c]);
      den[c] = denom(counts[c]);
    }
    return mean_of_ratios(num, den);
  };
  MacroMetrics m;
  m.recall = macro([](const auto& c) { return c.tp; }, [](const auto& c) { return c.tp + c.fn; });
  m.specificity = macro([](const auto& c) { return c.tn; }, [](const auto& c) { return c.tn + c.fp; });
  m.precision = macro([](const auto& c) { return c.tp; }, [](const auto& c) { return c.tp + c.fp; });
  m.f1 = macro([](const auto& c) { return 2 * c.tp; }, [](const auto& c) { return 2 * c.tp + c.fp + c.fn; });
  return m;
}

MetricsReport evaluate(const ScoredPredictions& preds) {
  MetricsReport r;
  r.accuracy = accuracy(preds);
  const auto ap = all_ap(preds);
  const auto auc = auc_per_class(preds);
  const auto w = supports(preds);
  const std::vector<std::uint64_t> ones(ap.size(), 1);
  r.map = weighted_mean(ap, w);
  r.cmap = weighted_mean(ap, ones);
  r.auc = std::accumulate(auc.begin(), auc.end(), 0.0) / static_cast<double>(auc.size());
  const auto macro = recall_specificity_f1(preds);
  r.recall = macro.recall;
  r.specificity = macro.specificity;
  r.precision = macro.precision;
  r.f1 = macro.f1;
  const auto counts = one_vs_rest_counts(confusion_matrix(preds));
  for (std::size_t c = 0; c < counts.size(); ++c) r.per_class.push_back({class_metrics(counts[c]), ap[c], auc[c]});
  return r;
}

std::string MetricsReport::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "accuracy=" << accuracy << "\nmap=" << map << "\ncmap=" << cmap << "\nauc=" << auc << "\nrecall=" << recall
     << "\nspecificity=" << specificity << "\nprecision=" << precision << "\nf1=" << f1 << "\n";
  return os.str();
}

std::string MetricsReport::per_class_csv() const {
  std::ostringstream os;
  os.precision(17);
  os << "class,support,precision,recall,specificity,f1,ap,auc\n";
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const auto& p = per_class[c];
    os << c << ',' << p.metrics.support << ',' << p.metrics.precision << ',' << p.metrics.recall << ','
       << p.metrics.specificity << ',' << p.metrics.f1 << ',' << p.ap << ',' << p.auc << '\n';
  }
  return os.str();
}

OlsFit ols_ci(std::span<const double> x, std::span<const double> y, double level) {
  if (x.size() != y.size()) fail(Errc::invalid_argument, "x and y differ in length");
  if (x.size() < 3) fail(Errc::too_few_points, "regression needs >= 3 points, got " + std::to_string(x.size()));
  if (!(level > 0.0 && level < 1.0)) fail(Errc::invalid_argument, "confidence level must lie in (0, 1)");
  const std::size_t n = x.size();
  const double nd = static_cast<double>(n);
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / nd;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / nd;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) fail(Errc::constant_x, "all x values are equal");
  OlsFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - (fit.intercept + fit.slope * x[i]);
    sse += r * r;
  }
  fit.slope_stderr = std::sqrt(sse / (nd - 2.0) / sxx);
  const double t = student_t_quantile(0.5 + level / 2.0, nd - 2.0);
  fit.ci_low = fit.slope - t * fit.slope_stderr;
  fit.ci_high = fit.slope + t * fit.slope_stderr;
  fit.r_squared = syy == 0.0 ? 1.0 : 1.0 - sse / syy;
  return fit;
}

AnovaResult anova_oneway(const std::vector<std::vector<double>>& groups) {
  if (groups.size() < 2) fail(Errc::too_few_groups, "ANOVA needs >= 2 groups, got " + std::to_string(groups.size()));
  double total = 0.0;
  std::size_t n = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].size() < 2) {
      fail(Errc::too_few_observations, "group " + std::to_string(g) + " has " + std::to_string(groups[g].size()) +
                                           " observations, needs >= 2");
    }
    total = std::accumulate(groups[g].begin(), groups[g].end(), total);
    n += groups[g].size();
  }
  const double grand = total / static_cast<double>(n);
  AnovaResult r;
  for (const auto& g : groups) {
    const double mean = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(g.size());
    r.ss_between += static_cast<double>(g.size()) * (mean - grand) * (mean - grand);
    for (double v : g) r.ss_within += (v - mean) * (v - mean);
  }
  r.df_between = static_cast<double>(groups.size() - 1);
  r.df_within = static_cast<double>(n - groups.size());
  const double msb = r.ss_between / r.df_between;
  const double msw = r.ss_within / r.df_within;
  if (msb == 0.0) {
    r.f = 0.0;
    r.p = 1.0;
  } else if (msw == 0.0) {
    r.f = std::numeric_limits<double>::infinity();
    r.p = 0.0;
  } else {
    r.f = msb / msw;
    r.p = f_sf(r.f, r.df_between, r.df_within);
  }
  return r;
}

SignTest sign_test_greater(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) fail(Errc::invalid_argument, "sign test needs paired samples");
  SignTest s;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) ++s.wins;
    else if (a[i] < b[i]) ++s.losses;
    else ++s.ties;
  }
  s.p = sign_test_p(s.wins, s.losses);
  return s;
}

}  // namespace sonotype
