#include "fairtrans/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fairtrans/checkpoint.hpp"
#include "fairtrans/rng.hpp"
#include "fairtrans/util.hpp"

namespace fairtrans {

namespace {

// Constant seeds for the dataset-wide identity projection and the group
// textures. Changing these changes every rendered image.
constexpr uint64_t kProjectionSeed = 0x9d2c5680f7a3b1c4ull;
constexpr uint64_t kTextureSeed = 0x5b8d01f2ae6c93d7ull;

// Pixel-pattern amplitude of the identity signal before the group affine
// map is applied. Chosen so moderate clamping keeps identities decodable.
constexpr double kProjectionStd = 0.5;

}  // namespace

const char* group_code(Group g) {
  switch (g) {
    case Group::A: return "A";
    case Group::E: return "E";
    case Group::C: return "C";
    case Group::I: return "I";
  }
  throw std::invalid_argument("group_code: bad group");
}

const char* group_name(Group g) {
  switch (g) {
    case Group::A: return "african";
    case Group::E: return "asian";
    case Group::C: return "caucasian";
    case Group::I: return "indian";
  }
  throw std::invalid_argument("group_name: bad group");
}

Group group_from_code(const std::string& code) {
  for (Group g : kGroups) {
    if (code == group_code(g)) return g;
  }
  throw std::invalid_argument("unknown group code: '" + code + "'");
}

const std::vector<double>& identity_projection() {
  static const std::vector<double> projection = [] {
    Rng rng(kProjectionSeed);
    std::vector<double> p(static_cast<size_t>(kImagePixels) * kIdentityDims);
    for (double& v : p) v = kProjectionStd * rng.normal();
    return p;
  }();
  return projection;
}

const std::array<std::array<double, kImagePixels>, 4>& group_textures() {
  static const std::array<std::array<double, kImagePixels>, 4> textures = [] {
    std::array<std::array<double, kImagePixels>, 4> t{};
    for (int g = 0; g < kGroupCount; ++g) {
      Rng rng(mix_seed(kTextureSeed, static_cast<uint64_t>(g)));
      for (int p = 0; p < kImagePixels; ++p) t[g][p] = rng.uniform() < 0.5 ? -1.0 : 1.0;
    }
    return t;
  }();
  return textures;
}

SubjectLatent make_subject(uint64_t seed, Group group) {
  SubjectLatent s;
  s.home = group;
  Rng rng(mix_seed(tag_seed(seed, "subject"), static_cast<uint64_t>(group_index(group))));
  double norm2 = 0.0;
  for (double& v : s.identity) {
    v = rng.normal();
    norm2 += v * v;
  }
  double inv = 1.0 / std::sqrt(norm2);
  for (double& v : s.identity) v *= inv;
  return s;
}

Sample render_image(const SubjectLatent& subject, Group group, uint64_t noise_seed,
                    double noise_sigma) {
  Sample out;
  out.subject_id = subject.id;
  out.group = group;
  out.provenance = Provenance::Original;
  out.render_seed = noise_seed;

  const std::vector<double>& P = identity_projection();
  const auto& texture = group_textures()[group_index(group)];
  const GroupIntensity gi = kGroupIntensity[group_index(group)];
  Rng noise(tag_seed(noise_seed, "render-noise"));
  for (int p = 0; p < kImagePixels; ++p) {
    double base = 0.0;
    const double* row = P.data() + static_cast<size_t>(p) * kIdentityDims;
    for (int k = 0; k < kIdentityDims; ++k) base += row[k] * subject.identity[k];
    double v = gi.gain * base + gi.bias + kTextureWeight * texture[p];
    if (noise_sigma > 0.0) v += noise_sigma * noise.normal();
    out.pixels[p] = std::min(std::max(v, 0.0), 1.0);
  }
  return out;
}

DomainDataset build_dataset(const GenerationConfig& cfg) {
  for (int g = 0; g < kGroupCount; ++g) {
    if (cfg.subjects_per_group[g] < 1) {
      throw std::invalid_argument(str_format("build_dataset: group %s needs >= 1 subject",
                                             group_code(kGroups[g])));
    }
  }
  if (cfg.images_per_subject < 1) {
    throw std::invalid_argument("build_dataset: images_per_subject must be >= 1");
  }

  DomainDataset ds;
  ds.split = cfg.split;
  ds.subjects_per_group = cfg.subjects_per_group;
  int next_subject = cfg.subject_id_offset;
  int next_sample = 0;
  for (Group g : kGroups) {
    for (int s = 0; s < cfg.subjects_per_group[group_index(g)]; ++s) {
      SubjectLatent subject = make_subject(mix_seed(cfg.seed, static_cast<uint64_t>(next_subject)), g);
      subject.id = next_subject;
      for (int i = 0; i < cfg.images_per_subject; ++i) {
        uint64_t noise_seed =
            mix_seed(cfg.seed, static_cast<uint64_t>(next_subject), static_cast<uint64_t>(i));
        Sample sample = render_image(subject, g, noise_seed);
        sample.sample_id = next_sample++;
        ds.samples.push_back(sample);
      }
      ds.images_per_subject[next_subject] = cfg.images_per_subject;
      ++next_subject;
    }
  }
  return ds;
}

std::vector<size_t> DomainDataset::group_indices(Group g) const {
  std::vector<size_t> idx;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].group == g) idx.push_back(i);
  }
  return idx;
}

std::map<int, std::vector<size_t>> DomainDataset::subjects_in_group(Group g) const {
  std::map<int, std::vector<size_t>> out;
  for (size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].group == g) out[samples[i].subject_id].push_back(i);
  }
  return out;
}

std::array<size_t, 4> DomainDataset::group_sample_counts() const {
  std::array<size_t, 4> counts{};
  for (const Sample& s : samples) counts[group_index(s.group)]++;
  return counts;
}

Group DomainDataset::dominant_group() const {
  auto counts = group_sample_counts();
  int best = 0;
  for (int g = 1; g < kGroupCount; ++g) {
    if (counts[g] > counts[best]) best = g;
  }
  return kGroups[best];
}

uint64_t DomainDataset::fingerprint() const {
  uint64_t h = kFnvOffset;
  h = fnv1a(split.data(), split.size(), h);
  for (const Sample& s : samples) {
    h = fnv1a_u64(static_cast<uint64_t>(s.sample_id), h);
    h = fnv1a_u64(static_cast<uint64_t>(s.subject_id), h);
    h = fnv1a_u64(static_cast<uint64_t>(group_index(s.group)), h);
    h = fnv1a_u64(s.provenance == Provenance::Original ? 0u : 1u, h);
    h = fnv1a_u64(static_cast<uint64_t>(group_index(s.source_group)), h);
    h = fnv1a_u64(s.render_seed, h);
    h = fnv1a(s.pixels.data(), sizeof(s.pixels), h);
  }
  return h;
}

void export_dataset(const DomainDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  CheckpointEntry pixels;
  pixels.name = "pixels";
  pixels.dims = {ds.samples.size(), static_cast<size_t>(kImagePixels)};
  pixels.values.reserve(ds.samples.size() * kImagePixels);
  for (const Sample& s : ds.samples) {
    pixels.values.insert(pixels.values.end(), s.pixels.begin(), s.pixels.end());
  }
  CheckpointEntry split;
  split.name = "split_tag";
  split.dims = {1};
  split.values = {ds.split == "verification" ? 1.0 : 0.0};
  write_checkpoint(dir / "pixels.ftns", {pixels, split});

  std::ostringstream csv;
  csv << "sample_id,subject_id,group,provenance,source_group,render_seed\n";
  for (const Sample& s : ds.samples) {
    bool synth = s.provenance == Provenance::Synthesized;
    csv << s.sample_id << ',' << s.subject_id << ',' << group_code(s.group) << ','
        << (synth ? "synthesized" : "original") << ',' << (synth ? group_code(s.source_group) : "")
        << ',' << s.render_seed << '\n';
  }
  atomic_write_file(dir / "samples.csv", csv.str());
}

DomainDataset import_dataset(const std::filesystem::path& dir) {
  auto entries = read_checkpoint(dir / "pixels.ftns");
  const CheckpointEntry* pixels = nullptr;
  const CheckpointEntry* split = nullptr;
  for (const auto& e : entries) {
    if (e.name == "pixels") pixels = &e;
    if (e.name == "split_tag") split = &e;
  }
  if (!pixels || pixels->dims.size() != 2 || pixels->dims[1] != kImagePixels) {
    throw std::runtime_error("import_dataset: malformed pixel block in " + dir.string());
  }

  DomainDataset ds;
  ds.split = (split && split->values.at(0) == 1.0) ? "verification" : "train";

  std::ifstream csv(dir / "samples.csv");
  if (!csv) throw std::runtime_error("import_dataset: missing samples.csv in " + dir.string());
  std::string line;
  std::getline(csv, line);  // header
  size_t row = 0;
  while (std::getline(csv, line)) {
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != 6) {
      throw std::runtime_error(str_format("import_dataset: bad row %zu in samples.csv", row));
    }
    Sample s;
    s.sample_id = std::stoi(fields[0]);
    s.subject_id = std::stoi(fields[1]);
    s.group = group_from_code(fields[2]);
    s.provenance = fields[3] == "synthesized" ? Provenance::Synthesized : Provenance::Original;
    s.source_group = fields[4].empty() ? s.group : group_from_code(fields[4]);
    s.render_seed = std::stoull(fields[5]);
    if (row >= pixels->dims[0]) {
      throw std::runtime_error("import_dataset: more CSV rows than pixel rows");
    }
    std::copy_n(pixels->values.begin() + static_cast<long>(row) * kImagePixels, kImagePixels,
                s.pixels.begin());
    ds.samples.push_back(s);
    ++row;
  }
  if (row != pixels->dims[0]) {
    throw std::runtime_error("import_dataset: CSV row count does not match pixel block");
  }

  // Rebuild bookkeeping from the sample table.
  std::map<int, Group> home;
  for (const Sample& s : ds.samples) {
    Group g = s.provenance == Provenance::Original ? s.group : s.source_group;
    auto it = home.find(s.subject_id);
    if (it == home.end()) home[s.subject_id] = g;
    ds.images_per_subject[s.subject_id]++;
  }
  ds.subjects_per_group = {};
  for (const auto& [id, g] : home) ds.subjects_per_group[group_index(g)]++;
  return ds;
}

}  // namespace fairtrans
