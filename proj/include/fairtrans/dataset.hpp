#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace fairtrans {

// Synthetic stand-in for a face dataset. Identity lives in a spatial
// pattern (a fixed random projection of a per-subject latent vector);
// the group attribute lives in global intensity statistics plus a fixed
// per-group texture. The two signals are separable by construction, so
// "transfer the group, keep the identity" has a measurable ground truth.

enum class Group : int { A = 0, E = 1, C = 2, I = 3 };

inline constexpr int kGroupCount = 4;
inline constexpr std::array<Group, 4> kGroups = {Group::A, Group::E, Group::C, Group::I};

const char* group_code(Group g);        // "A" "E" "C" "I"
const char* group_name(Group g);        // "african" "asian" "caucasian" "indian"
Group group_from_code(const std::string& code);
inline int group_index(Group g) { return static_cast<int>(g); }

inline constexpr int kImageSide = 16;
inline constexpr int kImagePixels = kImageSide * kImageSide;
inline constexpr int kIdentityDims = 8;
inline constexpr double kTextureWeight = 0.15;
inline constexpr double kDefaultNoiseSigma = 0.05;

struct GroupIntensity {
  double gain, bias;
};
// Per-group affine intensity map, indexed by group.
inline constexpr std::array<GroupIntensity, 4> kGroupIntensity = {
    GroupIntensity{0.6, 0.05},  // A
    GroupIntensity{0.8, 0.15},  // E
    GroupIntensity{1.0, 0.30},  // C
    GroupIntensity{0.8, 0.05},  // I
};

// Fixed projection from identity latents to pixel patterns, shared by every
// dataset, and the fixed per-group texture masks. Both come from constant
// seeds so regenerating with permuted group labels never changes the
// identity pattern itself.
const std::vector<double>& identity_projection();  // kImagePixels x kIdentityDims, row-major
const std::array<std::array<double, kImagePixels>, 4>& group_textures();

struct SubjectLatent {
  int id = 0;
  std::array<double, kIdentityDims> identity{};  // unit norm
  Group home = Group::A;
};

enum class Provenance { Original, Synthesized };

struct Sample {
  int sample_id = 0;
  int subject_id = 0;
  Group group = Group::A;
  Provenance provenance = Provenance::Original;
  Group source_group = Group::A;  // meaningful only when Synthesized
  uint64_t render_seed = 0;
  std::array<double, kImagePixels> pixels{};  // all in [0,1]
};

struct DomainDataset {
  std::string split;  // "train" | "verification"
  std::vector<Sample> samples;
  std::array<int, 4> subjects_per_group{};
  std::map<int, int> images_per_subject;

  std::vector<size_t> group_indices(Group g) const;
  std::map<int, std::vector<size_t>> subjects_in_group(Group g) const;
  std::array<size_t, 4> group_sample_counts() const;
  Group dominant_group() const;  // by sample count; canonical order breaks ties
  uint64_t fingerprint() const;
};

struct GenerationConfig {
  std::array<int, 4> subjects_per_group = {5, 5, 5, 5};
  int images_per_subject = 4;
  uint64_t seed = 1;
  std::string split = "train";
  int subject_id_offset = 0;  // keeps splits on disjoint subject-id ranges
};

SubjectLatent make_subject(uint64_t seed, Group group);

Sample render_image(const SubjectLatent& subject, Group group, uint64_t noise_seed,
                    double noise_sigma = kDefaultNoiseSigma);

DomainDataset build_dataset(const GenerationConfig& cfg);

// One pixel container plus a samples.csv sidecar with columns
// sample_id,subject_id,group,provenance,source_group,render_seed.
void export_dataset(const DomainDataset& ds, const std::filesystem::path& dir);
DomainDataset import_dataset(const std::filesystem::path& dir);

}  // namespace fairtrans
