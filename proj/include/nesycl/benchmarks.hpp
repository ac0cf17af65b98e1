#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nesycl/data.hpp"
#include "nesycl/knowledge.hpp"
#include "nesycl/models.hpp"
#include "nesycl/rng.hpp"

namespace nesycl {

// Synthetic stand-in for rendered glyphs: one Gaussian prototype per class in
// a d-dimensional feature space. Non-confusable prototypes sit >= 4 sigma
// apart; confusable pairs are placed at ~1.5 sigma so the second member is
// systematically mistaken for the first by an unsupervised encoder.
struct GlyphGeneratorConfig {
    int num_classes = 10;
    int feature_dim = 16;
    double noise = 1.0;  // sigma
    std::vector<std::pair<int, int>> confusable;
    std::uint64_t seed = 0;
};

class GlyphGenerator {
  public:
    explicit GlyphGenerator(GlyphGeneratorConfig config);

    std::vector<double> sample(int cls, Rng& rng) const;
    const std::vector<double>& prototype(int cls) const { return prototypes_[cls]; }
    const GlyphGeneratorConfig& config() const { return config_; }

  private:
    GlyphGeneratorConfig config_;
    std::vector<std::vector<double>> prototypes_;
};

struct StreamSizes {
    int train = 600;
    int val = 120;
    int test = 200;
    int ood = 200;
};

struct Task {
    int id = 0;  // 1-based, strictly increasing
    Dataset train, val, test;
    std::vector<std::size_t> label_set;             // labels appearing in this task
    std::vector<std::vector<int>> slot_value_sets;  // admissible concept values per slot
};

struct TaskStream {
    std::string benchmark;
    std::string knowledge_name;
    ConceptSchema schema;
    std::vector<int> fragment_dims;
    std::vector<SlotBinding> bindings;
    std::vector<Task> tasks;
    Dataset ood;  // empty when the benchmark has no OOD split
    std::uint64_t seed = 0;
    double sup_fraction = 0.0;
    StreamSizes sizes;
};

// 9-task continual MNIST-addition schedule: task t (0-based) holds all digit
// pairs whose sum is 2t or 2t+1.
TaskStream gen_mnadd_seq(const GlyphGeneratorConfig& glyphs, const StreamSizes& sizes,
                         double sup_fraction, std::uint64_t seed);

// Two-task shortcut benchmark: task 1 = four even-digit sum types, task 2 =
// all odd-digit sums; OOD = concept combinations unseen in any split.
// The glyph generator must have the (4, 9) confusable pair enabled.
TaskStream gen_mnadd_shortcut(const GlyphGeneratorConfig& glyphs, const StreamSizes& sizes,
                              double sup_fraction, std::uint64_t seed);

// Five-task CLE4EVR-like stream: per task two shapes and two colors out of
// ten, no overlap across tasks; labels are the joint (same_shape, same_color,
// same) tuple; OOD pairs objects from different tasks (always label (0,0,0)).
TaskStream gen_clevr_like(const GlyphGeneratorConfig& glyphs, const StreamSizes& sizes,
                          double sup_fraction, std::uint64_t seed);

TaskStream generate_benchmark(const std::string& benchmark, const StreamSizes& sizes,
                              double sup_fraction, std::uint64_t seed, int feature_dim = 16,
                              double noise = 1.0);

// Marks a uniformly random ceil(fraction * N) subset as densely annotated.
void attach_supervision(Dataset& dataset, double fraction, Rng& rng);

// --- MNIST IDX ingestion (big-endian, magic 2051/2049) ---

std::vector<std::vector<std::uint8_t>> load_idx_images(const std::string& path,
                                                       std::size_t* rows_out = nullptr,
                                                       std::size_t* cols_out = nullptr);
std::vector<int> load_idx_labels(const std::string& path);
void write_idx_images(const std::string& path, const std::vector<std::vector<std::uint8_t>>& images,
                      std::size_t rows, std::size_t cols);
void write_idx_labels(const std::string& path, const std::vector<int>& labels);

struct MnistRecord {
    std::vector<double> features;  // pixels flattened and scaled to [0,1]
    int label = 0;
};
std::vector<MnistRecord> load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// --- dataset files ---
// One CSV per task (+ ood.csv) with header
//   split,task,slot,feat_0..feat_{d-1},concept_0..concept_{k-1},label,supervised
// and a manifest.json carrying seed/config; a record spans k consecutive
// rows, one per slot, each row holding that slot's fragment features.
void write_task_stream(const std::string& dir, const TaskStream& stream);
TaskStream load_task_stream(const std::string& dir);
std::string stream_manifest_json(const TaskStream& stream);

}  // namespace nesycl
