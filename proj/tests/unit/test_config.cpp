#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "oostraj/checkpoint.hpp"
#include "oostraj/config.hpp"
#include "oostraj/error.hpp"

using namespace oostraj;
using config::json;

namespace {

std::string invalid_message(const json& user) {
  try {
    config::from_json(user);
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InvalidConfig);
    return e.what();
  }
  FAIL("expected InvalidConfig");
  return {};
}

bool mentions(const std::string& text, const std::string& needle) { return text.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("run config") {
  const auto d = config::defaults();
  CHECK(d.sim.t_obs == 20);
  CHECK(d.splits.train == 64);
  CHECK(config::profile("long").sim.t_obs == 100);
  CHECK(config::profile("long").sim.t_pred == 100);
  CHECK_THROWS_AS(config::profile("laptop"), Error);

  SUBCASE("round trip through JSON") {
    const auto c = config::from_json(d.to_json());
    CHECK(c.to_json() == d.to_json());
    CHECK(c.hash() == d.hash());
  }
  SUBCASE("overlay") {
    const auto c = config::from_json(json{{"sim", {{"t_obs", 12}}}, {"train", {{"resample_out_of_sight", false}}}});
    CHECK(c.sim.t_obs == 12);
    CHECK(c.sim.t_pred == d.sim.t_pred);
    CHECK_FALSE(c.train.resample_out_of_sight);
    CHECK(c.data_hash() != d.data_hash());
    CHECK(c.hash() != d.hash());
  }
  SUBCASE("training settings leave the data hash alone") {
    const auto c = config::from_json(json{{"train", {{"epochs", 3}}}});
    CHECK(c.data_hash() == d.data_hash());
    CHECK(c.hash() != d.hash());
  }
  SUBCASE("noise preset shorthand") {
    const auto c = config::from_json(json{{"sim", {{"noise", {{"preset", "hard"}}}}}});
    CHECK(c.sim.noise.drift_step_sigma == 0.05);
    const auto e = config::from_json(json{{"sim", {{"noise", {{"preset", "clean"}, {"gps_sigma", 0.5}}}}}});
    CHECK(e.sim.noise.gps_sigma == 0.5);
  }
  SUBCASE("errors name the field") {
    CHECK(mentions(invalid_message(json{{"sim", {{"t_obs", 1}}}}), "t_obs"));
    CHECK(mentions(invalid_message(json{{"sim", {{"t_pred", 0}}}}), "t_pred"));
    CHECK(mentions(invalid_message(json{{"sim", {{"t_obs", "twenty"}}}}), "sim.t_obs"));
    CHECK(mentions(invalid_message(json{{"sim", {{"n_agent", 4}}}}), "sim.n_agent: unknown key"));
    CHECK(mentions(invalid_message(json{{"train", {{"lr", nullptr}}}}), "train.lr"));
    CHECK(mentions(invalid_message(json{{"train", {{"resample_out_of_sight", 1}}}}), "train.resample_out_of_sight"));
    CHECK(mentions(invalid_message(json{{"seed", -3}}), "seed"));
    CHECK(mentions(invalid_message(json{{"model", {{"heads", 3}}}}), "model.heads"));
    CHECK(mentions(invalid_message(json{{"eval", {{"methods", {"ours", "magic"}}}}}), "magic"));
    CHECK(mentions(invalid_message(json{{"eval", {{"distance", "l1"}}}}), "eval.distance"));
    CHECK(mentions(invalid_message(json{{"sim", {{"camera_motion", "orbit"}}}}), "orbit"));
    CHECK(mentions(invalid_message(json::array()), "object"));
  }
  SUBCASE("files") {
    const auto dir = std::filesystem::temp_directory_path() / "oostraj_test_config";
    std::filesystem::create_directories(dir);
    {
      std::ofstream(dir / "ok.json") << "// desk run with a shorter window\n{\"sim\": {\"t_obs\": 10}}\n";
      std::ofstream(dir / "broken.json") << "{\"sim\": ";
    }
    CHECK(config::load(dir / "ok.json").sim.t_obs == 10);
    try {
      config::load(dir / "broken.json");
      FAIL("expected InvalidConfig");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::InvalidConfig);
    }
    try {
      config::load(dir / "absent.json");
      FAIL("expected Io");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::Io);
    }
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("checkpoint container") {
  ckpt::Checkpoint c;
  c.meta = {{"format", "test"}, {"epoch", 3}};
  c.blobs.push_back({"a", {2, 3}, {1, 2, 3, 4, 5, 6}});
  c.blobs.push_back({"b", {1}, {-0.1}});
  const auto bytes = ckpt::encode(c);
  CHECK(bytes.starts_with("OOSTCKPT"));
  const auto back = ckpt::decode(bytes);
  CHECK(back.meta == c.meta);
  CHECK(back.get("a").data == c.blobs[0].data);
  CHECK(back.get("a").shape == c.blobs[0].shape);
  CHECK(back.get("b").data[0] == -0.1);
  CHECK_FALSE(back.has("c"));
  CHECK_THROWS_AS(back.get("c"), Error);

  const auto schema_error = [](const std::string& b) {
    try {
      ckpt::decode(b);
    } catch (const Error& e) {
      return e.code() == Errc::Schema;
    }
    return false;
  };
  CHECK(schema_error(""));
  CHECK(schema_error("NOTACKPT" + bytes.substr(8)));
  CHECK(schema_error(bytes.substr(0, bytes.size() - 4)));
  auto bumped = bytes;
  bumped[8] = 9;  // version
  CHECK(schema_error(bumped));

  const auto path = std::filesystem::temp_directory_path() / "oostraj_test.ckpt";
  ckpt::write(path, c);
  CHECK(ckpt::read(path).get("a").data == c.blobs[0].data);
  std::filesystem::remove(path);
  try {
    ckpt::read(path);
    FAIL("expected Io");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::Io);
  }
}
