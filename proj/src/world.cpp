#include "ewod/sim/world.hpp"

#include <cmath>
#include <stdexcept>

#include "ewod/rng.hpp"

namespace ewod::sim {

namespace {

// Product of seeded plane rotations; orthogonal by construction.
linalg::Matrix random_rotation(Rng& rng, std::size_t d, std::size_t count,
                               double max_angle) {
  linalg::Matrix m(d, d);
  for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0;
  for (std::size_t n = 0; n < count; ++n) {
    const std::size_t i = rng.uniform_int(d);
    std::size_t j = rng.uniform_int(d - 1);
    if (j >= i) ++j;
    const double theta = rng.uniform(-max_angle, max_angle);
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    for (std::size_t col = 0; col < d; ++col) {
      const double a = m(i, col);
      const double b = m(j, col);
      m(i, col) = c * a - s * b;
      m(j, col) = s * a + c * b;
    }
  }
  return m;
}

}  // namespace

World::World(WorldConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.domains.empty()) {
    throw std::invalid_argument("World: at least one domain required");
  }
  const Rng root(cfg_.seed);
  for (std::size_t i = 0; i < cfg_.domains.size(); ++i) {
    if (!domain_index_.emplace(cfg_.domains[i], i).second) {
      throw std::invalid_argument("World: duplicate domain '" +
                                  cfg_.domains[i] + "'");
    }
    Rng rng = root.stream("domain", i);
    DomainTransform t;
    t.rotation = random_rotation(rng, cfg_.d_feat, cfg_.domain_rotations,
                                 cfg_.domain_angle);
    t.bias.resize(cfg_.d_feat);
    for (double& b : t.bias) b = cfg_.domain_bias_sigma * rng.gaussian();
    t.gain = rng.uniform(0.9, 1.15);
    transforms_.push_back(std::move(t));
  }
}

std::vector<double> World::prototype(int class_id) const {
  Rng rng = Rng(cfg_.seed).stream("proto", static_cast<std::uint64_t>(class_id));
  std::vector<double> v(cfg_.d_feat);
  double norm = 0.0;
  for (double& x : v) {
    x = rng.gaussian();
    norm += x * x;
  }
  norm = std::sqrt(norm);
  for (double& x : v) x *= cfg_.prototype_scale / norm;
  return v;
}

std::vector<double> World::transform(std::size_t domain_idx,
                                     const std::vector<double>& x) const {
  const DomainTransform& t = transforms_[domain_idx];
  std::vector<double> y = linalg::matvec(t.rotation, x);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = t.gain * y[i] + t.bias[i];
  return y;
}

Scene World::sample_scene(std::uint64_t scene_seed,
                          const std::vector<int>& classes,
                          std::size_t object_count) const {
  if (object_count > cfg_.regions_per_scene) {
    throw std::invalid_argument(
        "generate_scene: object count exceeds regions per scene");
  }
  if (object_count > 0 && classes.empty()) {
    throw std::invalid_argument("generate_scene: empty class set");
  }

  Rng rng = Rng(cfg_.seed).stream("scene", scene_seed);
  Scene scene;
  scene.image_id = "s" + std::to_string(scene_seed);

  const auto draw_box = [&rng]() -> std::array<double, 4> {
    return {rng.uniform(0.05, 0.6), rng.uniform(0.05, 0.6),
            rng.uniform(0.2, 0.35), rng.uniform(0.2, 0.35)};
  };

  for (std::size_t i = 0; i < cfg_.regions_per_scene; ++i) {
    Region region;
    region.box = draw_box();
    region.feature.resize(cfg_.d_feat);
    if (i < object_count) {
      const int cls = classes[rng.uniform_int(classes.size())];
      const std::vector<double> proto = prototype(cls);
      for (std::size_t k = 0; k < cfg_.d_feat; ++k) {
        region.feature[k] = proto[k] + cfg_.sigma_noise * rng.gaussian();
      }
      scene.gt_objects.push_back({region.box, cls});
    } else {
      for (double& f : region.feature) {
        f = cfg_.sigma_background * rng.gaussian();
      }
    }
    scene.regions.push_back(std::move(region));
  }
  return scene;
}

Scene World::generate_scene(std::uint64_t scene_seed,
                            const std::string& domain_tag,
                            const std::vector<int>& classes,
                            std::size_t object_count) const {
  const auto it = domain_index_.find(domain_tag);
  if (it == domain_index_.end()) {
    throw std::invalid_argument("generate_scene: unknown domain '" +
                                domain_tag + "'");
  }
  Scene scene = sample_scene(scene_seed, classes, object_count);
  scene.domain_tag = domain_tag;
  for (Region& region : scene.regions) {
    region.feature = transform(it->second, region.feature);
  }
  return scene;
}

Scene World::generate_pretrain_scene(std::uint64_t scene_seed,
                                     const std::vector<int>& classes,
                                     std::size_t object_count,
                                     std::size_t pretrain_domains) const {
  Scene scene = sample_scene(scene_seed, classes, object_count);
  scene.domain_tag = "pretrain";
  const std::size_t which =
      pretrain_domains == 0 ? 0 : scene_seed % pretrain_domains;
  if (which == 0) return scene;
  Rng rng = Rng(cfg_.seed).stream("pretrain-domain", which);
  DomainTransform t;
  t.rotation = random_rotation(rng, cfg_.d_feat, cfg_.domain_rotations,
                               cfg_.domain_angle);
  t.bias.resize(cfg_.d_feat);
  for (double& b : t.bias) b = cfg_.domain_bias_sigma * rng.gaussian();
  t.gain = rng.uniform(0.9, 1.15);
  for (Region& region : scene.regions) {
    std::vector<double> y = linalg::matvec(t.rotation, region.feature);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = t.gain * y[i] + t.bias[i];
    }
    region.feature = std::move(y);
  }
  return scene;
}

}  // namespace ewod::sim
