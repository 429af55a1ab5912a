#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <filesystem>
#include <fstream>

#include "countyml/error.hpp"
#include "countyml/explain.hpp"
#include "doctest.h"
#include "test_support.hpp"

using namespace countyml;

namespace {

// feature 0, threshold 0, balanced coverage, leaves 0 and 10.
Tree depth_one_tree() {
  Tree tree;
  tree.nodes.resize(3);
  tree.nodes[0] = {0, 0.0, 1, 2, 5.0, 100};
  tree.nodes[1] = {-1, 0.0, -1, -1, 0.0, 50};
  tree.nodes[2] = {-1, 0.0, -1, -1, 10.0, 50};
  return tree;
}

ForestModel forest_of(std::vector<Tree> trees, std::size_t p) {
  ForestModel model;
  model.trees = std::move(trees);
  model.params.n_estimators = model.trees.size();
  for (std::size_t j = 0; j < p; ++j) {
    model.feature_names.push_back("x" + std::to_string(j));
  }
  return model;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b,
                 double tolerance) {
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i] == doctest::Approx(b[i]).epsilon(tolerance).scale(1.0));
  }
}

}  // namespace

TEST_CASE("shap_linear") {
  SUBCASE("at the training means every attribution is zero") {
    StreamRng rng = StreamRng::from_seed(201);
    const LinearModel model = testsupport::random_linear_model(4, rng);
    const auto explanation = shap_linear(model, model.training_feature_means);
    for (const double phi : explanation.attributions) {
      CHECK(phi == doctest::Approx(0.0).scale(1.0));
    }
    CHECK(explanation.base_value == doctest::Approx(explanation.prediction));
  }
  SUBCASE("single feature, beta 2, mean 1, x 4 attributes 6") {
    LinearModel model;
    model.feature_names = {"x0"};
    model.coefficients = {2.0};
    model.training_feature_means = {1.0};
    model.intercept = 0.5;
    const auto explanation = shap_linear(model, {4.0});
    CHECK(explanation.attributions[0] == doctest::Approx(6.0));
    CHECK(explanation.base_value == doctest::Approx(2.5));
    CHECK(explanation.prediction == doctest::Approx(8.5));
  }
  SUBCASE("matches brute force exactly on random models") {
    StreamRng rng = StreamRng::from_seed(202);
    for (int trial = 0; trial < 30; ++trial) {
      const LinearModel model = testsupport::random_linear_model(5, rng);
      const auto x = testsupport::random_point(5, rng);
      const auto fast = shap_linear(model, x);
      const auto oracle = shap_brute_force(Model(model), x);
      check_close(fast.attributions, oracle.attributions, 1e-9);
      CHECK(fast.base_value == doctest::Approx(oracle.base_value));
    }
  }
}

TEST_CASE("shap_tree on hand-built trees") {
  SUBCASE("single leaf: base is the leaf value, no attributions") {
    Tree leaf;
    leaf.nodes.push_back({-1, 0.0, -1, -1, 3.25, 10});
    const ForestModel model = forest_of({leaf}, 2);
    const auto explanation = shap_tree(model, {1.0, -1.0});
    CHECK(explanation.base_value == doctest::Approx(3.25));
    CHECK(explanation.attributions[0] == 0.0);
    CHECK(explanation.attributions[1] == 0.0);
    CHECK(explanation.prediction == doctest::Approx(3.25));
  }
  SUBCASE("depth-1 tree routed right: attribution +5, base 5") {
    const ForestModel model = forest_of({depth_one_tree()}, 3);
    const auto explanation = shap_tree(model, {1.0, 0.0, 0.0});
    CHECK(explanation.attributions[0] == doctest::Approx(5.0));
    CHECK(explanation.attributions[1] == doctest::Approx(0.0).scale(1.0));
    CHECK(explanation.attributions[2] == doctest::Approx(0.0).scale(1.0));
    CHECK(explanation.base_value == doctest::Approx(5.0));
    CHECK(explanation.prediction == doctest::Approx(10.0));

    const auto left = shap_tree(model, {-1.0, 0.0, 0.0});
    CHECK(left.attributions[0] == doctest::Approx(-5.0));
    CHECK(left.prediction == doctest::Approx(0.0).scale(1.0));
  }
  SUBCASE("missing coverage is rejected") {
    Tree bad = depth_one_tree();
    bad.nodes[1].coverage = 0;
    const ForestModel model = forest_of({bad}, 1);
    try {
      shap_tree(model, {1.0});
      FAIL("expected MissingCoverage");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::MissingCoverage);
    }
  }
}

TEST_CASE("shap_brute_force basics") {
  SUBCASE("one feature: phi equals prediction minus base") {
    const ForestModel model = forest_of({depth_one_tree()}, 1);
    const auto explanation = shap_brute_force(Model(model), {2.0});
    CHECK(explanation.attributions[0] ==
          doctest::Approx(explanation.prediction - explanation.base_value));
  }
  SUBCASE("symmetric model explained at a symmetric point") {
    LinearModel model;
    model.feature_names = {"x0", "x1"};
    model.coefficients = {1.0, 1.0};
    model.training_feature_means = {0.0, 0.0};
    model.intercept = 0.0;
    const auto explanation = shap_brute_force(Model(model), {3.0, 3.0});
    CHECK(explanation.attributions[0] ==
          doctest::Approx(explanation.attributions[1]));
  }
  SUBCASE("three-feature Shapley weights match a hand expansion") {
    // Two depth-1 trees on different features; expand the 8-subset sum by
    // hand using weights |S|!(p-|S|-1)!/p! with p = 3: {2/6, 1/6, 1/6, 2/6}.
    Tree tree_a = depth_one_tree();  // splits feature 0
    Tree tree_b = depth_one_tree();
    tree_b.nodes[0].feature = 1;     // splits feature 1
    tree_b.nodes[0].node_mean = 5.0;
    const ForestModel model = forest_of({tree_a, tree_b}, 3);
    const std::vector<double> x = {1.0, -1.0, 0.3};
    // v(S) per tree: following/averaging gives tree_a: 5 unless 0 in S
    // (then 10), tree_b: 5 unless 1 in S (then 0); model = mean.
    // phi_0: only tree_a moves, marginal +2.5 at every position:
    //   (2/6)(7.5-5) + (1/6)(7.5-5) + (1/6)(5-2.5) + (2/6)(5-2.5) = 2.5
    const auto explanation = shap_brute_force(Model(model), x);
    CHECK(explanation.attributions[0] == doctest::Approx(2.5));
    CHECK(explanation.attributions[1] == doctest::Approx(-2.5));
    CHECK(explanation.attributions[2] == doctest::Approx(0.0).scale(1.0));
    CHECK(explanation.base_value == doctest::Approx(5.0));
    CHECK(explanation.prediction == doctest::Approx(5.0));
  }
  SUBCASE("too many features") {
    StreamRng rng = StreamRng::from_seed(203);
    const LinearModel model = testsupport::random_linear_model(16, rng);
    const auto x = testsupport::random_point(16, rng);
    CHECK_THROWS_AS(shap_brute_force(Model(model), x), Error);
  }
}

TEST_CASE("tree shap equals brute force on random ensembles") {
  StreamRng rng = StreamRng::from_seed(204);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t p = 2 + static_cast<std::size_t>(rng.below(9));
    const bool use_gbm = trial % 2 == 1;
    Model model;
    if (use_gbm) {
      model = testsupport::random_gbm_model(
          p, 1 + static_cast<std::size_t>(rng.below(6)),
          1 + static_cast<int>(rng.below(4)), rng);
    } else {
      model = testsupport::random_forest_model(
          p, 1 + static_cast<std::size_t>(rng.below(6)),
          1 + static_cast<int>(rng.below(4)), rng);
    }
    for (int point = 0; point < 4; ++point) {
      const auto x = testsupport::random_point(p, rng);
      const auto fast = shap_model(model, x);
      const auto oracle = shap_brute_force(model, x);
      check_close(fast.attributions, oracle.attributions, 1e-9);
      CHECK(fast.base_value ==
            doctest::Approx(oracle.base_value).epsilon(1e-9));
    }
  }
}

TEST_CASE("local accuracy holds for every algorithm") {
  StreamRng rng = StreamRng::from_seed(205);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t p = 1 + static_cast<std::size_t>(rng.below(8));
    Model model;
    switch (trial % 3) {
      case 0:
        model = testsupport::random_linear_model(p, rng);
        break;
      case 1:
        model = testsupport::random_forest_model(p, 5, 4, rng);
        break;
      default:
        model = testsupport::random_gbm_model(p, 8, 3, rng);
        break;
    }
    const auto x = testsupport::random_point(p, rng);
    const auto explanation = shap_model(model, x);
    double total = explanation.base_value;
    for (const double phi : explanation.attributions) total += phi;
    CHECK(std::abs(total - explanation.prediction) < 1e-6);
    CHECK(explanation.prediction ==
          doctest::Approx(predict_row(model, x.data(), p)));
  }
}

TEST_CASE("dummy features receive exactly zero") {
  SUBCASE("tree never splits the feature") {
    const ForestModel model = forest_of({depth_one_tree()}, 3);
    StreamRng rng = StreamRng::from_seed(206);
    for (int trial = 0; trial < 10; ++trial) {
      const auto x = testsupport::random_point(3, rng);
      const auto explanation = shap_tree(model, x);
      CHECK(explanation.attributions[1] == 0.0);
      CHECK(explanation.attributions[2] == 0.0);
      const auto oracle = shap_brute_force(Model(model), x);
      CHECK(oracle.attributions[1] == 0.0);
      CHECK(oracle.attributions[2] == 0.0);
    }
  }
  SUBCASE("zero coefficient") {
    LinearModel model;
    model.feature_names = {"x0", "x1"};
    model.coefficients = {3.0, 0.0};
    model.training_feature_means = {1.0, 1.0};
    model.intercept = 0.0;
    const auto explanation = shap_linear(model, {5.0, 9.0});
    CHECK(explanation.attributions[1] == 0.0);
  }
}

TEST_CASE("forest attributions are the mean of per-tree attributions") {
  StreamRng rng = StreamRng::from_seed(207);
  const ForestModel model = testsupport::random_forest_model(4, 6, 3, rng);
  const auto x = testsupport::random_point(4, rng);
  const auto combined = shap_tree(model, x);

  std::vector<double> mean_phi(4, 0.0);
  double mean_base = 0.0;
  for (const auto& tree : model.trees) {
    ForestModel single = model;
    single.trees = {tree};
    const auto one = shap_tree(single, x);
    for (std::size_t j = 0; j < 4; ++j) mean_phi[j] += one.attributions[j];
    mean_base += one.base_value;
  }
  for (auto& v : mean_phi) v /= static_cast<double>(model.trees.size());
  mean_base /= static_cast<double>(model.trees.size());
  check_close(combined.attributions, mean_phi, 1e-12);
  CHECK(combined.base_value == doctest::Approx(mean_base).epsilon(1e-12));
}

TEST_CASE("mean_abs_shap") {
  const std::vector<std::string> names = {"alpha", "beta", "gamma"};
  auto explanation = [](std::vector<double> phi) {
    ShapExplanation e;
    e.attributions = std::move(phi);
    return e;
  };

  SUBCASE("single explanation ranks by absolute attribution") {
    const auto ranking =
        mean_abs_shap({explanation({-4.0, 1.0, 2.5})}, names);
    REQUIRE(ranking.entries.size() == 3);
    CHECK(ranking.entries[0].first == "alpha");
    CHECK(ranking.entries[0].second == doctest::Approx(4.0));
    CHECK(ranking.entries[1].first == "gamma");
    CHECK(ranking.entries[2].first == "beta");
  }
  SUBCASE("all-zero attributions tie alphabetically") {
    const auto ranking =
        mean_abs_shap({explanation({0.0, 0.0, 0.0})}, names);
    CHECK(ranking.entries[0].first == "alpha");
    CHECK(ranking.entries[1].first == "beta");
    CHECK(ranking.entries[2].first == "gamma");
  }
  SUBCASE("permutation of the row set changes nothing") {
    StreamRng rng = StreamRng::from_seed(208);
    std::vector<ShapExplanation> rows;
    for (int i = 0; i < 20; ++i) {
      rows.push_back(explanation({rng.normal(), rng.normal(), rng.normal()}));
    }
    auto shuffled = rows;
    StreamRng shuffler = StreamRng::from_seed(209);
    shuffler.shuffle(shuffled);
    const auto a = mean_abs_shap(rows, names);
    const auto b = mean_abs_shap(shuffled, names);
    for (std::size_t i = 0; i < a.entries.size(); ++i) {
      CHECK(a.entries[i].first == b.entries[i].first);
      CHECK(a.entries[i].second == doctest::Approx(b.entries[i].second));
    }
  }
  SUBCASE("empty input") {
    CHECK_THROWS_AS(mean_abs_shap({}, names), Error);
  }
}

TEST_CASE("summary plot export") {
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "countyml_explain";
  fs::create_directories(dir);
  const std::vector<std::string> names = {"a", "b"};
  std::vector<ShapExplanation> rows(2);
  rows[0].attributions = {1.0, -3.0};
  rows[0].x = {0.5, 0.6};
  rows[1].attributions = {2.0, 0.5};
  rows[1].x = {0.7, 0.8};
  const std::vector<std::string> fips = {"00001", "00002"};

  SUBCASE("top_k equal to p exports every cell") {
    const auto path = dir / "summary_all.csv";
    export_summary_plot_data(rows, fips, names, 2, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "feature,fips,feature_value,shap_value");
    std::size_t count = 0;
    // Feature "b" has the larger mean |phi| and must come first.
    std::getline(in, line);
    CHECK(line == "b,00001,0.6,-3");
    ++count;
    while (std::getline(in, line)) {
      if (!line.empty()) ++count;
    }
    CHECK(count == 4);
  }
  SUBCASE("top_k zero writes only the header") {
    const auto path = dir / "summary_none.csv";
    export_summary_plot_data(rows, fips, names, 0, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "feature,fips,feature_value,shap_value");
    CHECK_FALSE(std::getline(in, line));
  }
  SUBCASE("top_k beyond p is rejected") {
    CHECK_THROWS_AS(
        export_summary_plot_data(rows, fips, names, 3, dir / "x.csv"), Error);
  }
}

TEST_CASE("ranking spearman") {
  FeatureRanking a;
  a.entries = {{"x", 3.0}, {"y", 2.0}, {"z", 1.0}};
  FeatureRanking same = a;
  CHECK(ranking_spearman(a, same) == doctest::Approx(1.0));
  FeatureRanking reversed;
  reversed.entries = {{"z", 3.0}, {"y", 2.0}, {"x", 1.0}};
  CHECK(ranking_spearman(a, reversed) == doctest::Approx(-1.0));
}
