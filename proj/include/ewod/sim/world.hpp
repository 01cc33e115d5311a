#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ewod/linalg/matrix.hpp"

// Synthetic detection world: every class has a fixed latent prototype and
// every domain a fixed affine feature transform, so the feature
// distribution shifts across domains while class identity is preserved.

namespace ewod::sim {

struct Region {
  std::vector<double> feature;
  std::array<double, 4> box;  // x, y, w, h in unit-square coordinates
};

struct GtObject {
  std::array<double, 4> box;
  int class_id;
};

struct Scene {
  std::string image_id;
  std::string domain_tag;
  std::vector<Region> regions;
  std::vector<GtObject> gt_objects;
};

struct WorldConfig {
  std::uint64_t seed = 0;
  std::size_t d_feat = 32;
  std::size_t regions_per_scene = 12;
  double sigma_noise = 0.25;
  double sigma_background = 0.3;
  double prototype_scale = 4.0;  // ℓ2 norm of every class prototype
  // Each domain rotates features by `domain_rotations` random plane
  // rotations with angles up to `domain_angle` radians, then applies a
  // gain and bias. Mild by default: the shift has to be absorbable by a
  // low-rank adapter, as a full random rotation would not be.
  std::size_t domain_rotations = 16;
  double domain_angle = 0.35;
  double domain_bias_sigma = 0.3;
  std::vector<std::string> domains;
};

class World {
 public:
  explicit World(WorldConfig cfg);

  const WorldConfig& config() const { return cfg_; }

  /// Latent prototype of a class; deterministic in (world seed, id).
  std::vector<double> prototype(int class_id) const;

  /// One scene: `object_count` regions carry class objects (box equals the
  /// ground-truth box), the rest are background. All sampling happens
  /// before the domain transform, so the same seed yields identical boxes
  /// and classes in every domain.
  Scene generate_scene(std::uint64_t scene_seed, const std::string& domain_tag,
                       const std::vector<int>& classes,
                       std::size_t object_count) const;

  /// Scene for base pretraining, distorted by one of `pretrain_domains`
  /// random affine feature transforms drawn like the schedule domains but
  /// from a disjoint stream (index scene_seed % pretrain_domains; index 0
  /// leaves features raw). Covering a spread of distortions keeps the
  /// pretrained localization stream robust to domain shift without ever
  /// seeing a schedule domain. domain_tag is "pretrain".
  Scene generate_pretrain_scene(std::uint64_t scene_seed,
                                const std::vector<int>& classes,
                                std::size_t object_count,
                                std::size_t pretrain_domains = 8) const;

 private:
  struct DomainTransform {
    linalg::Matrix rotation;
    std::vector<double> bias;
    double gain = 1.0;
  };

  Scene sample_scene(std::uint64_t scene_seed, const std::vector<int>& classes,
                     std::size_t object_count) const;
  std::vector<double> transform(std::size_t domain_idx,
                                const std::vector<double>& x) const;

  WorldConfig cfg_;
  std::vector<DomainTransform> transforms_;
  std::map<std::string, std::size_t> domain_index_;
};

}  // namespace ewod::sim
