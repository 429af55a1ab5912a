#include <algorithm>
#include <cmath>
#include <numeric>

#include "countyml/error.hpp"
#include "countyml/models.hpp"

namespace countyml {

void DesignMatrix::validate() const {
  if (n < 2 || p < 1) {
    throw Error(ErrorKind::InvalidArgument,
                "design matrix needs n >= 2 and p >= 1; got n = " +
                    std::to_string(n) + ", p = " + std::to_string(p));
  }
  if (x.size() != n * p || y.size() != n || feature_names.size() != p ||
      row_fips.size() != n) {
    throw Error(ErrorKind::DimensionMismatch,
                "design matrix buffers disagree with n/p");
  }
  for (const double v : x) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::InvalidArgument,
                  "design matrix contains a non-finite feature value");
    }
  }
  for (const double v : y) {
    if (!std::isfinite(v)) {
      throw Error(ErrorKind::InvalidArgument,
                  "design matrix contains a non-finite target");
    }
  }
}

DesignMatrix DesignMatrix::subset(const std::vector<std::size_t>& rows) const {
  DesignMatrix out;
  out.n = rows.size();
  out.p = p;
  out.feature_names = feature_names;
  out.x.reserve(rows.size() * p);
  out.y.reserve(rows.size());
  out.row_fips.reserve(rows.size());
  for (const std::size_t r : rows) {
    out.x.insert(out.x.end(), x.begin() + r * p, x.begin() + (r + 1) * p);
    out.y.push_back(y[r]);
    out.row_fips.push_back(row_fips[r]);
  }
  return out;
}

DesignMatrix build_design_matrix(const Dataset& dataset,
                                 const std::vector<std::size_t>& rows) {
  DesignMatrix matrix;
  const std::size_t outcome = dataset.outcome_index();
  for (std::size_t v = 0; v < dataset.n_variables(); ++v) {
    if (v != outcome) matrix.feature_names.push_back(dataset.specs()[v].name);
  }
  matrix.p = matrix.feature_names.size();
  matrix.n = rows.size();
  matrix.x.reserve(matrix.n * matrix.p);
  for (const std::size_t r : rows) {
    const auto& record = dataset.records().at(r);
    for (std::size_t v = 0; v < dataset.n_variables(); ++v) {
      const auto& cell = record.values[v];
      if (!cell.has_value()) {
        throw Error(ErrorKind::InvalidArgument,
                    "county " + record.fips + " variable '" +
                        dataset.specs()[v].name +
                        "' is missing; impute before modeling");
      }
      if (v == outcome) {
        matrix.y.push_back(*cell);
      } else {
        matrix.x.push_back(*cell);
      }
    }
    matrix.row_fips.push_back(record.fips);
  }
  matrix.validate();
  return matrix;
}

DesignMatrix build_design_matrix(const Dataset& dataset) {
  std::vector<std::size_t> rows(dataset.n_records());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return build_design_matrix(dataset, rows);
}

SplitIndices split_indices(std::size_t n, double test_fraction,
                           std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorKind::InvalidArgument,
                "test_fraction must lie strictly between 0 and 1");
  }
  const auto test_size = static_cast<std::size_t>(
      std::llround(static_cast<double>(n) * test_fraction));
  if (test_size == 0 || test_size >= n) {
    throw Error(ErrorKind::DegenerateSplit,
                "split of n = " + std::to_string(n) + " at fraction " +
                    std::to_string(test_fraction) +
                    " leaves one side empty");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  StreamRng rng = StreamRng::from_seed(seed).derive(0x53504c4954ULL);  // "SPLIT"
  rng.shuffle(order);

  SplitIndices split;
  split.test.assign(order.begin(), order.begin() + test_size);
  split.train.assign(order.begin() + test_size, order.end());
  std::sort(split.test.begin(), split.test.end());
  std::sort(split.train.begin(), split.train.end());
  return split;
}

TrainTestSplit train_test_split(const DesignMatrix& matrix,
                                double test_fraction, std::uint64_t seed) {
  const SplitIndices idx = split_indices(matrix.n, test_fraction, seed);
  return {matrix.subset(idx.train), matrix.subset(idx.test)};
}

std::size_t MaxFeatures::resolve(std::size_t p) const {
  std::size_t m = p;
  switch (kind) {
    case Kind::all:
      m = p;
      break;
    case Kind::sqrt:
      m = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(p))));
      break;
    case Kind::third:
      m = p / 3;
      break;
    case Kind::fraction:
      if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw Error(ErrorKind::InvalidArgument,
                    "max_features fraction must be in (0, 1]");
      }
      m = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(p)));
      break;
  }
  return std::clamp<std::size_t>(m, 1, p);
}

double Tree::predict_row(const double* row) const {
  std::size_t node = 0;
  while (!nodes[node].is_leaf()) {
    const auto& nd = nodes[node];
    node = row[nd.feature] <= nd.threshold
               ? static_cast<std::size_t>(nd.left)
               : static_cast<std::size_t>(nd.right);
  }
  return nodes[node].node_mean;
}

bool Tree::coverage_consistent() const {
  for (const auto& node : nodes) {
    if (node.is_leaf()) continue;
    const auto left = static_cast<std::size_t>(node.left);
    const auto right = static_cast<std::size_t>(node.right);
    if (node.coverage != nodes[left].coverage + nodes[right].coverage) {
      return false;
    }
  }
  return true;
}

namespace {

struct SplitChoice {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0;
  double gain = 0;
};

// Draws m distinct indices from [0, p) and returns them ascending, so the
// split scan visits candidates in a platform-independent order.
std::vector<std::size_t> draw_features(std::size_t p, std::size_t m,
                                       StreamRng& rng) {
  std::vector<std::size_t> all(p);
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (m >= p) return all;
  // Partial Fisher-Yates: the first m entries end up being the sample.
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(p - i));
    std::swap(all[i], all[j]);
  }
  all.resize(m);
  std::sort(all.begin(), all.end());
  return all;
}

class TreeBuilder {
 public:
  TreeBuilder(const DesignMatrix& matrix, const std::vector<double>& targets,
              const TreeParams& params, StreamRng& rng)
      : matrix_(matrix), targets_(targets), params_(params), rng_(rng) {}

  Tree build(std::vector<std::size_t> rows) {
    Tree tree;
    grow(tree, std::move(rows), 0);
    return tree;
  }

 private:
  // Returns the index of the node added for this row set.
  std::size_t grow(Tree& tree, std::vector<std::size_t> rows, int depth) {
    const std::size_t node_index = tree.nodes.size();
    tree.nodes.emplace_back();

    double sum = 0.0;
    double y_min = targets_[rows.front()];
    double y_max = y_min;
    for (const std::size_t r : rows) {
      sum += targets_[r];
      y_min = std::min(y_min, targets_[r]);
      y_max = std::max(y_max, targets_[r]);
    }
    const double mean = sum / static_cast<double>(rows.size());
    tree.nodes[node_index].node_mean = mean;
    tree.nodes[node_index].coverage = static_cast<std::uint32_t>(rows.size());

    const bool depth_reached = params_.max_depth > 0 && depth >= params_.max_depth;
    const bool too_small = rows.size() < 2 * params_.min_samples_leaf;
    if (depth_reached || too_small || y_min == y_max) {
      return node_index;
    }

    const SplitChoice choice = best_split(rows, sum);
    if (!choice.found) return node_index;

    std::vector<std::size_t> left_rows;
    std::vector<std::size_t> right_rows;
    left_rows.reserve(rows.size());
    right_rows.reserve(rows.size());
    for (const std::size_t r : rows) {
      if (matrix_.at(r, choice.feature) <= choice.threshold) {
        left_rows.push_back(r);
      } else {
        right_rows.push_back(r);
      }
    }
    rows.clear();
    rows.shrink_to_fit();

    tree.nodes[node_index].feature = static_cast<std::int32_t>(choice.feature);
    tree.nodes[node_index].threshold = choice.threshold;
    const std::size_t left = grow(tree, std::move(left_rows), depth + 1);
    tree.nodes[node_index].left = static_cast<std::int32_t>(left);
    const std::size_t right = grow(tree, std::move(right_rows), depth + 1);
    tree.nodes[node_index].right = static_cast<std::int32_t>(right);
    return node_index;
  }

  SplitChoice best_split(const std::vector<std::size_t>& rows,
                         double total_sum) {
    const std::size_t m = rows.size();
    const std::size_t n_candidates = params_.max_features.resolve(matrix_.p);
    const std::vector<std::size_t> features =
        draw_features(matrix_.p, n_candidates, rng_);

    // Gain is the sum-of-squared-error reduction
    //   sumL^2/nL + sumR^2/nR - sum^2/n,
    // maximized over midpoints between consecutive distinct sorted values.
    // Features ascend and thresholds ascend within a feature, so requiring a
    // strictly larger gain implements the documented tie-break.
    const double parent_term = total_sum * total_sum / static_cast<double>(m);
    SplitChoice best;

    std::vector<std::pair<double, double>> order(m);  // (feature value, target)
    for (const std::size_t feature : features) {
      for (std::size_t i = 0; i < m; ++i) {
        order[i] = {matrix_.at(rows[i], feature), targets_[rows[i]]};
      }
      std::stable_sort(order.begin(), order.end(),
                       [](const auto& a, const auto& b) {
                         return a.first < b.first;
                       });
      if (order.front().first == order.back().first) continue;

      double left_sum = 0.0;
      for (std::size_t i = 0; i + 1 < m; ++i) {
        left_sum += order[i].second;
        if (order[i + 1].first <= order[i].first) continue;
        const std::size_t n_left = i + 1;
        const std::size_t n_right = m - n_left;
        if (n_left < params_.min_samples_leaf ||
            n_right < params_.min_samples_leaf) {
          continue;
        }
        const double right_sum = total_sum - left_sum;
        const double gain =
            left_sum * left_sum / static_cast<double>(n_left) +
            right_sum * right_sum / static_cast<double>(n_right) - parent_term;
        if (gain > best.gain) {
          const double midpoint =
              order[i].first + (order[i + 1].first - order[i].first) / 2.0;
          // Degenerate midpoint (adjacent representable values): keep the
          // lower value so the left branch stays nonempty.
          best = {true, feature,
                  midpoint > order[i].first ? midpoint : order[i].first,
                  gain};
        }
      }
    }
    return best;
  }

  const DesignMatrix& matrix_;
  const std::vector<double>& targets_;
  const TreeParams& params_;
  StreamRng& rng_;
};

}  // namespace

Tree fit_tree(const DesignMatrix& matrix, const std::vector<std::size_t>& rows,
              const std::vector<double>& targets, const TreeParams& params,
              StreamRng& rng) {
  if (rows.empty()) {
    throw Error(ErrorKind::InvalidArgument, "fit_tree: empty row set");
  }
  if (params.min_samples_leaf < 1) {
    throw Error(ErrorKind::InvalidArgument, "min_samples_leaf must be >= 1");
  }
  TreeBuilder builder(matrix, targets, params, rng);
  return builder.build(rows);
}

Tree fit_tree(const DesignMatrix& matrix, const TreeParams& params,
              StreamRng& rng) {
  matrix.validate();
  std::vector<std::size_t> rows(matrix.n);
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return fit_tree(matrix, rows, matrix.y, params, rng);
}

}  // namespace countyml
