#include <doctest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include <unistd.h>

#include "catpose/errors.hpp"
#include "catpose/io.hpp"
#include "support.hpp"

using namespace catpose;

namespace {

fs::path scratch(const char* name) {
  const fs::path p = fs::temp_directory_path() / ("catpose_io_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  return p;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

}  // namespace

TEST_CASE("doubles round-trip bit for bit") {
  auto rng = make_rng(101);
  for (int k = 0; k < 10000; ++k) {
    const double v = std::ldexp(testing::uniform(rng, -1, 1), static_cast<int>(rng() % 200) - 100);
    CHECK(same_bits(parse_double(format_double(v)), v));
  }
  for (double v : {0.0, -0.0, 1.0, 0.1, std::numeric_limits<double>::denorm_min(),
                   std::numeric_limits<double>::max()}) {
    CHECK(same_bits(parse_double(format_double(v)), v));
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK_THROWS_AS(parse_double("1.5x"), ValidationError);
  CHECK_THROWS_AS(parse_double(""), ValidationError);
}

TEST_CASE("point files") {
  const fs::path dir = scratch("points");
  auto rng = make_rng(102);
  PointCloud c;
  for (int i = 0; i < 500; ++i) c.push_back(testing::random_vec(rng, -3, 3));
  write_points(dir / "a.xyz", c);
  CHECK(read_points(dir / "a.xyz") == c);

  write_text(dir / "b.xyz", "# header\n1 2 3\n\n  # indented comment\n4 5.5 -6\n");
  const PointCloud b = read_points(dir / "b.xyz");
  REQUIRE(b.size() == 2);
  CHECK(b[1] == Vec3(4, 5.5, -6));

  write_text(dir / "bad.xyz", "1 2 3\n1 2\n");
  try {
    read_points(dir / "bad.xyz");
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("bad.xyz:2") != std::string::npos);
  }
  write_text(dir / "nan.xyz", "1 2 three\n");
  CHECK_THROWS_AS(read_points(dir / "nan.xyz"), ValidationError);
  CHECK_THROWS_AS(read_points(dir / "missing.xyz"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("labels, manifests and poses") {
  const fs::path dir = scratch("misc");
  InlierMask m;
  m.inlier = {1, 0, 0, 1};
  m.score = {1, 0, 0, 1};
  write_labels(dir / "l.txt", m);
  CHECK(read_labels(dir / "l.txt").inlier == m.inlier);
  write_text(dir / "bad.txt", "1\n2\n");
  CHECK_THROWS_AS(read_labels(dir / "bad.txt"), ValidationError);

  write_manifest(dir / "m.txt", {{"category", "can"}, {"pose_gt", "1 2 3"}});
  const Manifest mf = read_manifest(dir / "m.txt");
  CHECK(mf.at("category") == "can");
  CHECK(mf.at("pose_gt") == "1 2 3");
  write_text(dir / "dup.txt", "a 1\na 2\n");
  CHECK_THROWS_AS(read_manifest(dir / "dup.txt"), ValidationError);

  auto rng = make_rng(103);
  const Pose9 p = testing::random_pose(rng);
  const Pose9 q = parse_pose(format_pose(p));
  CHECK(q.rotation == p.rotation);
  CHECK(q.translation == p.translation);
  CHECK(q.size == p.size);
  CHECK_THROWS_AS(parse_pose("1 2 3"), ValidationError);
  fs::remove_all(dir);
}

TEST_CASE("bundles round-trip exactly") {
  const fs::path dir = scratch("bundle");
  Bundle b;
  InstanceOptions io;
  io.points = 200;
  io.noise_sigma = 0.003;
  io.outlier_fraction = 0.1;
  for (const char* cat : {"can", "laptop"}) {
    b.profiles.push_back(make_prior(builtin_spec(cat), 4, 64, 1));
    for (int k = 0; k < 2; ++k) {
      b.instances.push_back({std::string(cat) + "-" + std::to_string(k),
                             make_instance(builtin_spec(cat), io, static_cast<std::uint64_t>(k) * 977 + 13)});
    }
  }
  write_bundle(dir, b);
  const Bundle r = read_bundle(dir);
  REQUIRE(r.profiles.size() == 2);
  REQUIRE(r.instances.size() == 4);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(r.profile(b.profiles[k].name).prior == b.profiles[k].prior);
    CHECK(r.profile(b.profiles[k].name).mean_size == b.profiles[k].mean_size);
    CHECK(r.profile(b.profiles[k].name).symmetry.kind == b.profiles[k].symmetry.kind);
  }
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& x = b.instances[k];
    const auto& y = r.instances[k];
    CHECK(y.id == x.id);
    CHECK(y.instance.category == x.instance.category);
    CHECK(y.instance.seed == x.instance.seed);
    CHECK(y.instance.observed == x.instance.observed);
    CHECK(y.instance.coords_gt == x.instance.coords_gt);
    CHECK(y.instance.inliers_gt.inlier == x.instance.inliers_gt.inlier);
    CHECK(y.instance.pose_gt.rotation == x.instance.pose_gt.rotation);
    CHECK(y.instance.pose_gt.translation == x.instance.pose_gt.translation);
    CHECK(y.instance.pose_gt.size == x.instance.pose_gt.size);
  }
  CHECK_THROWS_AS(r.profile("bowl"), ValidationError);

  // Writing the read-back bundle reproduces every byte.
  const fs::path again = scratch("bundle2");
  write_bundle(again, r);
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    CHECK(read_text(e.path()) == read_text(again / fs::relative(e.path(), dir)));
  }

  fs::remove(dir / "instances" / "can-1" / "labels.txt");
  CHECK_THROWS_AS(read_bundle(dir), IoError);
  CHECK_THROWS_AS(read_bundle(dir / "nope"), IoError);
  fs::remove_all(dir);
  fs::remove_all(again);
}
