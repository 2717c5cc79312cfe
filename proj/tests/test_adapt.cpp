#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "calfront/adapt.hpp"
#include "calfront/errors.hpp"
#include "fixtures.hpp"
#include "net_checks.hpp"

using namespace calfront;
using namespace calfront::adapt;

namespace {

struct Setup {
  Dataset source, target, val;
  net::NetConfig net;
  TrainConfig train;
};

Setup setup(experiment::Tag tag = experiment::Tag::kBaseline) {
  const auto& pair = fixtures::tiny_pair();
  const auto c = experiment::resolve(fixtures::tiny_run_config(), tag);
  return {pair.source, pair.target.subset(Split::kTrain), pair.target.subset(Split::kVal), c.net, c.train};
}

bool same_params(const net::Checkpoint& a, const net::Checkpoint& b) {
  if (a.tensors.size() != b.tensors.size()) return false;
  for (std::size_t i = 0; i < a.tensors.size(); ++i)
    if (a.tensors[i].first != b.tensors[i].first || a.tensors[i].second != b.tensors[i].second) return false;
  return true;
}

}  // namespace

TEST_CASE("cosine schedule") {
  CHECK(cosine_lr(1e-3, 0, 100) == doctest::Approx(1e-3));
  CHECK(cosine_lr(1e-3, 50, 100) == doctest::Approx(5e-4));
  CHECK(cosine_lr(1e-3, 100, 100) == doctest::Approx(0.0));
}

TEST_CASE("AdamW minimises a quadratic") {
  std::vector<net::Parameter> p{{"w", Eigen::MatrixXd::Constant(2, 2, 3.0), Eigen::MatrixXd::Zero(2, 2)}};
  AdamW opt(0.9, 0.999, 1e-8, 0.0);
  for (int i = 0; i < 500; ++i) {
    p[0].grad = 2.0 * p[0].value;
    opt.step(p, 0.05);
  }
  CHECK(p[0].value.cwiseAbs().maxCoeff() < 1e-2);
  CHECK(opt.steps() == 500);
}

TEST_CASE("early stopping semantics") {
  EarlyStopping s(1);
  CHECK(s.update(1, 0.5));
  CHECK(s.update(2, 0.6));
  CHECK_FALSE(s.update(3, 0.55));
  CHECK(s.should_stop());
  CHECK(s.best_epoch() == 2);
  EarlyStopping tie(2);
  tie.update(1, 0.5);
  CHECK_FALSE(tie.update(2, 0.5));  // equal is not an improvement
  CHECK_THROWS_AS(EarlyStopping(0), ValidationError);
}

TEST_CASE("batch mixing") {
  const auto mixed = mix_batches(10000, true, 1.0, false, 3);
  const auto frac = static_cast<double>(std::ranges::count(mixed, Domain::kTarget)) / 10000.0;
  CHECK(std::abs(frac - 0.5) <= 0.02);
  const auto two = mix_batches(10000, true, 2.0, false, 4);
  CHECK(std::abs(static_cast<double>(std::ranges::count(two, Domain::kTarget)) / 10000.0 - 2.0 / 3.0) <= 0.02);
  const auto only = mix_batches(1000, true, 1.0, true, 5);
  CHECK(std::ranges::count(only, Domain::kTarget) == 1000);
  const auto none = mix_batches(1000, false, 1.0, false, 5);
  CHECK(std::ranges::count(none, Domain::kSource) == 1000);
  CHECK(mix_batches(100, true, 1.0, false, 9) == mix_batches(100, true, 1.0, false, 9));
}

TEST_CASE("train config validation and JSON round trip") {
  TrainConfig c;
  c.target_ratio = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.target_ratio = 1.0;
  c.patience = 0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c.patience = 2;
  c.policy = composer::SeriesPolicy::summer_reference(3, 4);
  c.seed = 77;
  c.shift_augment_px = 3;
  nlohmann::json j = c;
  CHECK(j.get<TrainConfig>() == c);
}

TEST_CASE("early stopping inside train returns the epoch-2 checkpoint") {
  auto s = setup();
  s.train.patience = 1;
  s.train.max_epochs = 5;
  const std::vector<double> scores{0.5, 0.6, 0.55, 0.9};
  net::Checkpoint at_two;
  TrainHooks hooks;
  hooks.validate = [&](net::Network& n, int epoch) {
    if (epoch == 2) at_two = n.to_checkpoint();
    return scores.at(static_cast<std::size_t>(epoch - 1));
  };
  const auto r = train(s.source, nullptr, s.val, s.net, s.train, hooks);
  CHECK(r.best_epoch == 2);
  CHECK(r.history.size() == 3);
  CHECK(r.best.meta.epoch == 2);
  CHECK(r.best.meta.best_val_iou == 0.6);
  CHECK(same_params(r.best, at_two));
  for (const auto& h : r.history) CHECK(h.val_iou <= r.best.meta.best_val_iou);
}

TEST_CASE("baseline never samples target and zero target data changes nothing") {
  auto s = setup();
  const auto a = train(s.source, nullptr, s.val, s.net, s.train);
  CHECK(std::ranges::count(a.sampler_log, Domain::kTarget) == 0);
  const Dataset empty;
  const auto b = train(s.source, &empty, s.val, s.net, s.train);
  CHECK(a.first_loss == b.first_loss);
  CHECK(a.best_epoch == b.best_epoch);
  CHECK(same_params(a.best, b.best));
  CHECK(a.best.meta.seed == s.train.seed);
}

TEST_CASE("few-shot training samples both domains and is deterministic") {
  auto s = setup(experiment::Tag::kFewShot);
  s.train.seed = 4;
  const auto a = train(s.source, &s.target, s.val, s.net, s.train);
  const auto b = train(s.source, &s.target, s.val, s.net, s.train);
  CHECK(std::ranges::count(a.sampler_log, Domain::kTarget) > 0);
  CHECK(std::ranges::count(a.sampler_log, Domain::kSource) > 0);
  CHECK(a.first_loss == b.first_loss);
  CHECK(a.best_epoch == b.best_epoch);
  CHECK(same_params(a.best, b.best));
}

TEST_CASE("summer policy trains with the consecutive fallback on few-shot data") {
  auto s = setup(experiment::Tag::kRockMask);
  CHECK(s.net.in_channels == 2);
  CHECK(s.net.series_length == 7);
  const auto r = train(s.source, &s.target, s.val, s.net, s.train);
  CHECK(r.fallback_series > 0);
  s.train.fallback_consecutive = false;
  CHECK_THROWS_AS(train(s.source, &s.target, s.val, s.net, s.train), DataError);
}

TEST_CASE("train writes a log and a checkpoint") {
  auto s = setup();
  const auto dir = std::filesystem::temp_directory_path() / "calfront_test_train";
  std::filesystem::remove_all(dir);
  TrainHooks hooks;
  hooks.out_dir = dir;
  const auto r = train(s.source, nullptr, s.val, s.net, s.train, hooks);
  std::ifstream in(dir / "train_log.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.contains("val_iou"));
    ++lines;
  }
  CHECK(lines == static_cast<int>(r.history.size()));
  CHECK(same_params(net::load_checkpoint(dir / "best.ckpt"), r.best));
}

TEST_CASE("train errors") {
  auto s = setup();
  CHECK_THROWS_AS(train(Dataset{}, nullptr, s.val, s.net, s.train), DataError);
  CHECK_THROWS_AS(train(s.source, nullptr, Dataset{}, s.net, s.train), DataError);
  auto net_bad = s.net;
  net_bad.in_channels = 2;
  CHECK_THROWS_AS(train(s.source, nullptr, s.val, net_bad, s.train), ValidationError);

  Dataset poisoned = s.source;
  for (auto& f : poisoned.frames)
    f.intensity(f.intensity.height() / 2, f.intensity.width() / 2) = std::nan("");
  try {
    train(poisoned, nullptr, s.val, s.net, s.train);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("epoch 1") != std::string::npos);
    CHECK(msg.find("batch 0") != std::string::npos);
  }
}

TEST_CASE("ensemble retraining") {
  auto s = setup();
  s.train.max_epochs = 1;
  const auto one = retrain_ensemble(s.source, nullptr, s.val, s.net, s.train, 1);
  REQUIRE(one.members.size() == 1);
  CHECK(same_params(one.members[0].best, train(s.source, nullptr, s.val, s.net, s.train).best));

  const auto five = retrain_ensemble(s.source, nullptr, s.val, s.net, s.train, 5);
  REQUIRE(five.members.size() == 5);
  CHECK(five.failures.empty());
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(five.members[i].best.meta.seed == s.train.seed + i);
    for (std::size_t j = i + 1; j < 5; ++j) CHECK_FALSE(same_params(five.members[i].best, five.members[j].best));
  }
  const auto again = retrain_ensemble(s.source, nullptr, s.val, s.net, s.train, 5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(same_params(five.members[i].best, again.members[i].best));
  CHECK_THROWS_AS(retrain_ensemble(s.source, nullptr, s.val, s.net, s.train, 0), ValidationError);
}

TEST_CASE("one series can be overfit") {
  const auto& pair = fixtures::tiny_pair();
  auto c = checks::tiny_config(2);
  c.height = 32;
  c.width = 32;
  c.crop_fraction = 1.0;
  pipeline::SeriesOptions opt{composer::SeriesPolicy::consecutive(2), false, false};
  const auto sample = pipeline::compose_for(pair.source, 5, opt);
  const auto x = pipeline::series_tensor(pair.source, sample, false);
  const auto labels = pipeline::series_labels(pair.source, sample);
  net::Network n(c, 1);
  AdamW opt_w(0.9, 0.999, 1e-8, 0.0);
  double loss = 1e9;
  for (int step = 0; step < 200 && loss >= 0.05; ++step) {
    n.zero_grad();
    auto r = net::cross_entropy(n.forward(x), labels, sample.retain, 1.0);
    loss = r.loss;
    n.backward(r.grad);
    opt_w.step(n.parameters(), 1e-2);
  }
  CHECK(loss < 0.05);
}
