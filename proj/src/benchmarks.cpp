#include "nesycl/benchmarks.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "nesycl/stats.hpp"

namespace nesycl {

using nlohmann::json;

GlyphGenerator::GlyphGenerator(GlyphGeneratorConfig config) : config_(std::move(config)) {
    const int n = config_.num_classes;
    const int d = config_.feature_dim;
    if (n > d) throw std::invalid_argument("glyph generator: feature_dim must be >= num_classes");
    Rng rng(derive_seed(config_.seed, "glyph-prototypes"));
    // Orthonormal class directions (Gram-Schmidt on seeded gaussians) scaled
    // to 4 sigma, so distinct prototypes end up 4*sqrt(2) sigma apart.
    prototypes_.assign(n, std::vector<double>(d, 0.0));
    for (int i = 0; i < n; ++i) {
        std::vector<double>& p = prototypes_[i];
        while (true) {
            for (double& v : p) v = rng.gaussian();
            for (int j = 0; j < i; ++j) {
                double dot = 0.0;
                for (int a = 0; a < d; ++a) dot += p[a] * prototypes_[j][a];
                double scale = dot / (16.0 * config_.noise * config_.noise);
                for (int a = 0; a < d; ++a) p[a] -= scale * prototypes_[j][a];
            }
            double norm = 0.0;
            for (double v : p) norm += v * v;
            norm = std::sqrt(norm);
            if (norm > 1e-6) {
                for (double& v : p) v *= 4.0 * config_.noise / norm;
                break;
            }
        }
    }
    for (auto [anchor, shifted] : config_.confusable) {
        std::vector<double> dir(d);
        double norm = 0.0;
        for (double& v : dir) {
            v = rng.gaussian();
        }
        for (double v : dir) norm += v * v;
        norm = std::sqrt(norm);
        for (int a = 0; a < d; ++a)
            prototypes_[shifted][a] = prototypes_[anchor][a] + 1.5 * config_.noise * dir[a] / norm;
    }
}

std::vector<double> GlyphGenerator::sample(int cls, Rng& rng) const {
    std::vector<double> x = prototypes_.at(cls);
    for (double& v : x) v += rng.gaussian(0.0, config_.noise);
    return x;
}

void attach_supervision(Dataset& dataset, double fraction, Rng& rng) {
    if (fraction < 0.0 || fraction > 1.0) throw std::invalid_argument("supervision fraction must be in [0,1]");
    for (Example& e : dataset) e.supervised = false;
    const std::size_t n = dataset.size();
    const std::size_t m = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n)));
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t i = 0; i < m; ++i) dataset[order[i]].supervised = true;
}

namespace {

std::vector<std::pair<int, int>> pairs_with_sum(int sum, int digits = 10) {
    std::vector<std::pair<int, int>> out;
    for (int a = 0; a < digits; ++a) {
        int b = sum - a;
        if (b >= 0 && b < digits) out.emplace_back(a, b);
    }
    return out;
}

Example make_pair_example(const GlyphGenerator& glyphs, int c1, int c2, Rng& rng) {
    Example e;
    e.fragments = {glyphs.sample(c1, rng), glyphs.sample(c2, rng)};
    e.concepts = {c1, c2};
    e.label = static_cast<std::size_t>(c1 + c2);
    return e;
}

std::vector<std::size_t> sorted_labels(const Dataset& d) {
    std::set<std::size_t> s;
    for (const Example& e : d) s.insert(e.label);
    return {s.begin(), s.end()};
}

std::vector<std::vector<int>> slot_values_of(const Dataset& d, std::size_t k) {
    std::vector<std::set<int>> sets(k);
    for (const Example& e : d)
        for (std::size_t j = 0; j < k; ++j) sets[j].insert(e.concepts[j]);
    std::vector<std::vector<int>> out(k);
    for (std::size_t j = 0; j < k; ++j) out[j] = {sets[j].begin(), sets[j].end()};
    return out;
}

void finalize_task(Task& task, std::size_t k) {
    task.label_set = sorted_labels(task.train);
    task.slot_value_sets = slot_values_of(task.train, k);
}

}  // namespace

TaskStream gen_mnadd_seq(const GlyphGeneratorConfig& glyph_cfg, const StreamSizes& sizes,
                         double sup_fraction, std::uint64_t seed) {
    GlyphGeneratorConfig gc = glyph_cfg;
    gc.seed = derive_seed(seed, "glyphs");
    GlyphGenerator glyphs(gc);
    Rng rng(derive_seed(seed, "stream"));
    Rng sup_rng(derive_seed(seed, "supervision"));

    TaskStream stream;
    stream.benchmark = "mnadd-seq";
    stream.knowledge_name = "mnist-add";
    stream.schema = addition_knowledge().schema;
    stream.fragment_dims = {gc.feature_dim, gc.feature_dim};
    stream.bindings = {{0, 0}, {1, 0}};
    stream.seed = seed;
    stream.sup_fraction = sup_fraction;
    stream.sizes = sizes;

    for (int t = 0; t < 9; ++t) {
        Task task;
        task.id = t + 1;
        const std::vector<int> labels = {2 * t, 2 * t + 1};
        auto sample_split = [&](int count) {
            Dataset d;
            d.reserve(count);
            for (int i = 0; i < count; ++i) {
                int y = labels[rng.uniform_index(labels.size())];
                auto pairs = pairs_with_sum(y);
                auto [c1, c2] = pairs[rng.uniform_index(pairs.size())];
                d.push_back(make_pair_example(glyphs, c1, c2, rng));
            }
            return d;
        };
        task.train = sample_split(sizes.train);
        task.val = sample_split(sizes.val);
        task.test = sample_split(sizes.test);
        attach_supervision(task.train, sup_fraction, sup_rng);
        finalize_task(task, 2);
        stream.tasks.push_back(std::move(task));
    }
    return stream;
}

TaskStream gen_mnadd_shortcut(const GlyphGeneratorConfig& glyph_cfg, const StreamSizes& sizes,
                              double sup_fraction, std::uint64_t seed) {
    GlyphGeneratorConfig gc = glyph_cfg;
    gc.seed = derive_seed(seed, "glyphs");
    if (std::find(gc.confusable.begin(), gc.confusable.end(), std::make_pair(4, 9)) == gc.confusable.end())
        gc.confusable.emplace_back(4, 9);
    GlyphGenerator glyphs(gc);
    Rng rng(derive_seed(seed, "stream"));
    Rng sup_rng(derive_seed(seed, "supervision"));

    TaskStream stream;
    stream.benchmark = "mnadd-shortcut";
    stream.knowledge_name = "mnist-add";
    stream.schema = addition_knowledge().schema;
    stream.fragment_dims = {gc.feature_dim, gc.feature_dim};
    stream.bindings = {{0, 0}, {1, 0}};
    stream.seed = seed;
    stream.sup_fraction = sup_fraction;
    stream.sizes = sizes;

    // Task 1: the four even sum types (both orders).
    const std::vector<std::pair<int, int>> types = {{0, 6}, {4, 6}, {2, 8}, {4, 8}};
    {
        Task task;
        task.id = 1;
        auto sample_split = [&](int count) {
            Dataset d;
            for (int i = 0; i < count; ++i) {
                auto [a, b] = types[rng.uniform_index(types.size())];
                if (rng.uniform() < 0.5) std::swap(a, b);
                d.push_back(make_pair_example(glyphs, a, b, rng));
            }
            return d;
        };
        task.train = sample_split(sizes.train);
        task.val = sample_split(sizes.val);
        task.test = sample_split(sizes.test);
        attach_supervision(task.train, sup_fraction, sup_rng);
        finalize_task(task, 2);
        stream.tasks.push_back(std::move(task));
    }

    // Task 2: all sums of odd digits.
    const std::vector<int> odd = {1, 3, 5, 7, 9};
    {
        Task task;
        task.id = 2;
        auto sample_split = [&](int count) {
            Dataset d;
            for (int i = 0; i < count; ++i) {
                int a = odd[rng.uniform_index(odd.size())];
                int b = odd[rng.uniform_index(odd.size())];
                d.push_back(make_pair_example(glyphs, a, b, rng));
            }
            return d;
        };
        task.train = sample_split(sizes.train);
        task.val = sample_split(sizes.val);
        task.test = sample_split(sizes.test);
        attach_supervision(task.train, sup_fraction, sup_rng);
        finalize_task(task, 2);
        stream.tasks.push_back(std::move(task));
    }

    // OOD: unordered digit pairs never observed in any split. Every unseen
    // combination appears at least once when the split size permits.
    std::set<std::pair<int, int>> seen;
    for (auto [a, b] : types) seen.insert(std::minmax(a, b));
    for (int a : odd)
        for (int b : odd) seen.insert(std::minmax(a, b));
    std::vector<std::pair<int, int>> unseen;
    for (int a = 0; a <= 9; ++a)
        for (int b = a; b <= 9; ++b)
            if (!seen.count({a, b})) unseen.emplace_back(a, b);
    for (int i = 0; i < sizes.ood; ++i) {
        auto [a, b] = unseen[static_cast<std::size_t>(i) < unseen.size()
                                 ? static_cast<std::size_t>(i)
                                 : rng.uniform_index(unseen.size())];
        if (rng.uniform() < 0.5) std::swap(a, b);
        stream.ood.push_back(make_pair_example(glyphs, a, b, rng));
    }
    return stream;
}

TaskStream gen_clevr_like(const GlyphGeneratorConfig& glyph_cfg, const StreamSizes& sizes,
                          double sup_fraction, std::uint64_t seed) {
    GlyphGeneratorConfig shape_cfg = glyph_cfg;
    shape_cfg.seed = derive_seed(seed, "shape-glyphs");
    GlyphGeneratorConfig color_cfg = glyph_cfg;
    color_cfg.seed = derive_seed(seed, "color-glyphs");
    GlyphGenerator shape_glyphs(shape_cfg);
    GlyphGenerator color_glyphs(color_cfg);
    Rng rng(derive_seed(seed, "stream"));
    Rng sup_rng(derive_seed(seed, "supervision"));

    const int d = glyph_cfg.feature_dim;
    const KnowledgeSpec spec = clevr_knowledge();

    TaskStream stream;
    stream.benchmark = "clevr-like";
    stream.knowledge_name = "clevr-samecolor-sameshape";
    stream.schema = spec.schema;
    stream.fragment_dims = {2 * d + 4, 2 * d + 4};
    stream.bindings = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};
    stream.seed = seed;
    stream.sup_fraction = sup_fraction;
    stream.sizes = sizes;

    // Material and size are free variations: four nuisance dims the encoders
    // must learn to ignore.
    auto make_object = [&](int shape, int color) {
        std::vector<double> frag = shape_glyphs.sample(shape, rng);
        std::vector<double> color_part = color_glyphs.sample(color, rng);
        frag.insert(frag.end(), color_part.begin(), color_part.end());
        const double material = rng.uniform() < 0.5 ? -2.0 : 2.0;
        const double size = rng.uniform() < 0.5 ? -2.0 : 2.0;
        frag.push_back(material * glyph_cfg.noise);
        frag.push_back(material * glyph_cfg.noise);
        frag.push_back(size * glyph_cfg.noise);
        frag.push_back(size * glyph_cfg.noise);
        return frag;
    };
    auto make_example = [&](int s1, int c1, int s2, int c2) {
        Example e;
        e.fragments = {make_object(s1, c1), make_object(s2, c2)};
        e.concepts = {s1, s2, c1, c2};
        const int y1 = s1 == s2 ? 1 : 0;
        const int y2 = c1 == c2 ? 1 : 0;
        const int y3 = (y1 && y2) ? 1 : 0;
        const std::vector<int> y = {y1, y2, y3};
        e.label = spec.schema.pack_label(y);
        return e;
    };

    for (int t = 0; t < 5; ++t) {
        const std::vector<int> shapes = {2 * t, 2 * t + 1};
        const std::vector<int> colors = {2 * t, 2 * t + 1};
        Task task;
        task.id = t + 1;
        auto sample_split = [&](int count) {
            Dataset dset;
            for (int i = 0; i < count; ++i) {
                // uniform over the four mutually exclusive classes
                const std::size_t cls = rng.uniform_index(4);
                int s1 = shapes[rng.uniform_index(2)];
                int c1 = colors[rng.uniform_index(2)];
                int s2, c2;
                const bool same_shape = cls == 1 || cls == 3;
                const bool same_color = cls == 2 || cls == 3;
                s2 = same_shape ? s1 : (s1 == shapes[0] ? shapes[1] : shapes[0]);
                c2 = same_color ? c1 : (c1 == colors[0] ? colors[1] : colors[0]);
                dset.push_back(make_example(s1, c1, s2, c2));
            }
            return dset;
        };
        task.train = sample_split(sizes.train);
        task.val = sample_split(sizes.val);
        task.test = sample_split(sizes.test);
        attach_supervision(task.train, sup_fraction, sup_rng);
        finalize_task(task, 4);
        stream.tasks.push_back(std::move(task));
    }

    // OOD: unseen combinations of training objects, i.e. pairs of object
    // types drawn from different tasks; their shapes and colors always
    // differ, so every OOD label is (0,0,0).
    std::vector<std::pair<std::pair<int, int>, std::pair<int, int>>> combos;
    for (int t1 = 0; t1 < 5; ++t1)
        for (int t2 = t1 + 1; t2 < 5; ++t2)
            for (int s1 = 2 * t1; s1 <= 2 * t1 + 1; ++s1)
                for (int c1 = 2 * t1; c1 <= 2 * t1 + 1; ++c1)
                    for (int s2 = 2 * t2; s2 <= 2 * t2 + 1; ++s2)
                        for (int c2 = 2 * t2; c2 <= 2 * t2 + 1; ++c2)
                            combos.push_back({{s1, c1}, {s2, c2}});
    for (int i = 0; i < sizes.ood; ++i) {
        auto combo = combos[static_cast<std::size_t>(i) < combos.size()
                                ? static_cast<std::size_t>(i)
                                : rng.uniform_index(combos.size())];
        if (rng.uniform() < 0.5) std::swap(combo.first, combo.second);
        stream.ood.push_back(
            make_example(combo.first.first, combo.first.second, combo.second.first, combo.second.second));
    }
    return stream;
}

TaskStream generate_benchmark(const std::string& benchmark, const StreamSizes& sizes,
                              double sup_fraction, std::uint64_t seed, int feature_dim, double noise) {
    GlyphGeneratorConfig gc;
    gc.feature_dim = feature_dim;
    gc.noise = noise;
    if (benchmark == "mnadd-seq") return gen_mnadd_seq(gc, sizes, sup_fraction, seed);
    if (benchmark == "mnadd-shortcut") return gen_mnadd_shortcut(gc, sizes, sup_fraction, seed);
    if (benchmark == "clevr-like") return gen_clevr_like(gc, sizes, sup_fraction, seed);
    throw std::invalid_argument("unknown benchmark: " + benchmark);
}

// --- IDX ---

namespace {

std::uint32_t read_be32(std::ifstream& in, const std::string& path, std::size_t offset) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in)
        throw std::runtime_error("idx parse error: " + path + " truncated at offset " + std::to_string(offset));
    return (static_cast<std::uint32_t>(b[0]) << 24) | (static_cast<std::uint32_t>(b[1]) << 16) |
           (static_cast<std::uint32_t>(b[2]) << 8) | static_cast<std::uint32_t>(b[3]);
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

std::vector<std::vector<std::uint8_t>> load_idx_images(const std::string& path, std::size_t* rows_out,
                                                       std::size_t* cols_out) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("idx parse error: cannot open " + path);
    const std::uint32_t magic = read_be32(in, path, 0);
    if (magic != 0x00000803u)
        throw std::runtime_error("idx parse error: " + path + " bad magic number 0x" + hex64(magic).substr(8) +
                                 " at offset 0 (expected 0x00000803)");
    const std::uint32_t count = read_be32(in, path, 4);
    const std::uint32_t rows = read_be32(in, path, 8);
    const std::uint32_t cols = read_be32(in, path, 12);
    std::vector<std::vector<std::uint8_t>> images(count, std::vector<std::uint8_t>(rows * cols));
    for (std::uint32_t i = 0; i < count; ++i) {
        in.read(reinterpret_cast<char*>(images[i].data()), static_cast<std::streamsize>(rows * cols));
        if (!in)
            throw std::runtime_error("idx parse error: " + path + " truncated at offset " +
                                     std::to_string(16 + static_cast<std::size_t>(i) * rows * cols));
    }
    if (rows_out) *rows_out = rows;
    if (cols_out) *cols_out = cols;
    return images;
}

std::vector<int> load_idx_labels(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("idx parse error: cannot open " + path);
    const std::uint32_t magic = read_be32(in, path, 0);
    if (magic != 0x00000801u)
        throw std::runtime_error("idx parse error: " + path + " bad magic number 0x" + hex64(magic).substr(8) +
                                 " at offset 0 (expected 0x00000801)");
    const std::uint32_t count = read_be32(in, path, 4);
    std::vector<int> labels(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        unsigned char b;
        in.read(reinterpret_cast<char*>(&b), 1);
        if (!in)
            throw std::runtime_error("idx parse error: " + path + " truncated at offset " + std::to_string(8 + i));
        labels[i] = b;
    }
    return labels;
}

void write_idx_images(const std::string& path, const std::vector<std::vector<std::uint8_t>>& images,
                      std::size_t rows, std::size_t cols) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_be32(out, 0x00000803u);
    write_be32(out, static_cast<std::uint32_t>(images.size()));
    write_be32(out, static_cast<std::uint32_t>(rows));
    write_be32(out, static_cast<std::uint32_t>(cols));
    for (const auto& img : images)
        out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
}

void write_idx_labels(const std::string& path, const std::vector<int>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    write_be32(out, 0x00000801u);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    for (int l : labels) {
        const unsigned char b = static_cast<unsigned char>(l);
        out.write(reinterpret_cast<const char*>(&b), 1);
    }
}

std::vector<MnistRecord> load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    std::size_t rows = 0, cols = 0;
    const auto images = load_idx_images(images_path, &rows, &cols);
    const auto labels = load_idx_labels(labels_path);
    if (images.size() != labels.size())
        throw std::runtime_error("idx parse error: image count " + std::to_string(images.size()) +
                                 " does not match label count " + std::to_string(labels.size()));
    std::vector<MnistRecord> out(images.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        out[i].features.resize(rows * cols);
        for (std::size_t p = 0; p < images[i].size(); ++p)
            out[i].features[p] = static_cast<double>(images[i][p]) / 255.0;
        out[i].label = labels[i];
    }
    return out;
}

// --- CSV / manifest ---

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_dataset_rows(std::ofstream& out, const Dataset& d, const char* split, int task_id,
                        const TaskStream& stream) {
    const std::size_t k = stream.schema.num_slots();
    for (const Example& e : d) {
        for (std::size_t j = 0; j < k; ++j) {
            out << split << ',' << task_id << ',' << j;
            const std::vector<double>& frag = e.fragments[stream.bindings[j].fragment];
            for (double v : frag) out << ',' << fmt_double(v);
            for (int c : e.concepts) out << ',' << c;
            out << ',' << e.label << ',' << (e.supervised ? 1 : 0) << '\n';
        }
    }
}

std::string csv_header(const TaskStream& stream) {
    std::ostringstream h;
    h << "split,task,slot";
    const int d = stream.fragment_dims[0];
    for (int i = 0; i < d; ++i) h << ",feat_" << i;
    for (std::size_t j = 0; j < stream.schema.num_slots(); ++j) h << ",concept_" << j;
    h << ",label,supervised";
    return h.str();
}

}  // namespace

std::string stream_manifest_json(const TaskStream& stream) {
    json m;
    m["benchmark"] = stream.benchmark;
    m["knowledge"] = stream.knowledge_name;
    m["seed"] = stream.seed;
    m["sup_fraction"] = stream.sup_fraction;
    m["sizes"] = {{"train", stream.sizes.train},
                  {"val", stream.sizes.val},
                  {"test", stream.sizes.test},
                  {"ood", stream.sizes.ood}};
    m["fragment_dims"] = stream.fragment_dims;
    json slots = json::array();
    for (std::size_t j = 0; j < stream.schema.num_slots(); ++j)
        slots.push_back({{"name", stream.schema.slots[j].name},
                         {"cardinality", stream.schema.slots[j].cardinality},
                         {"fragment", stream.bindings[j].fragment},
                         {"encoder", stream.bindings[j].encoder}});
    m["slots"] = slots;
    m["label_cardinalities"] = stream.schema.label_cardinalities;
    m["task_count"] = stream.tasks.size();
    json label_sets = json::array();
    json slot_values = json::array();
    for (const Task& t : stream.tasks) {
        label_sets.push_back(t.label_set);
        slot_values.push_back(t.slot_value_sets);
    }
    m["task_label_sets"] = label_sets;
    m["task_slot_values"] = slot_values;
    m["has_ood"] = !stream.ood.empty();
    m["config_hash"] = hex64(fnv1a(m.dump()));
    return m.dump(2);
}

void write_task_stream(const std::string& dir, const TaskStream& stream) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const std::string header = csv_header(stream);
    for (const Task& task : stream.tasks) {
        std::ofstream out(fs::path(dir) / ("task_" + std::to_string(task.id) + ".csv"));
        if (!out) throw std::runtime_error("cannot write dataset file in " + dir);
        out << header << '\n';
        write_dataset_rows(out, task.train, "train", task.id, stream);
        write_dataset_rows(out, task.val, "val", task.id, stream);
        write_dataset_rows(out, task.test, "test", task.id, stream);
    }
    if (!stream.ood.empty()) {
        std::ofstream out(fs::path(dir) / "ood.csv");
        out << header << '\n';
        write_dataset_rows(out, stream.ood, "ood", 0, stream);
    }
    std::ofstream mout(fs::path(dir) / "manifest.json");
    mout << stream_manifest_json(stream) << '\n';
}

namespace {

struct CsvRow {
    std::string split;
    int task = 0;
    int slot = 0;
    std::vector<double> feats;
    std::vector<int> concepts;
    std::size_t label = 0;
    bool supervised = false;
};

CsvRow parse_row(const std::string& line, int feat_count, int k) {
    CsvRow row;
    std::stringstream ss(line);
    std::string cell;
    auto next = [&]() {
        if (!std::getline(ss, cell, ',')) throw std::runtime_error("dataset csv: short row");
        return cell;
    };
    row.split = next();
    row.task = std::stoi(next());
    row.slot = std::stoi(next());
    row.feats.reserve(feat_count);
    for (int i = 0; i < feat_count; ++i) row.feats.push_back(std::stod(next()));
    for (int j = 0; j < k; ++j) row.concepts.push_back(std::stoi(next()));
    row.label = static_cast<std::size_t>(std::stoul(next()));
    row.supervised = next() == "1";
    return row;
}

}  // namespace

TaskStream load_task_stream(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream min(fs::path(dir) / "manifest.json");
    if (!min) throw std::runtime_error("missing manifest.json in " + dir);
    json m = json::parse(min);

    TaskStream stream;
    stream.benchmark = m.at("benchmark").get<std::string>();
    stream.knowledge_name = m.at("knowledge").get<std::string>();
    stream.seed = m.at("seed").get<std::uint64_t>();
    stream.sup_fraction = m.at("sup_fraction").get<double>();
    stream.sizes.train = m.at("sizes").at("train").get<int>();
    stream.sizes.val = m.at("sizes").at("val").get<int>();
    stream.sizes.test = m.at("sizes").at("test").get<int>();
    stream.sizes.ood = m.at("sizes").at("ood").get<int>();
    stream.fragment_dims = m.at("fragment_dims").get<std::vector<int>>();
    for (const auto& s : m.at("slots")) {
        stream.schema.slots.push_back({s.at("name").get<std::string>(), s.at("cardinality").get<int>()});
        stream.bindings.push_back({s.at("fragment").get<int>(), s.at("encoder").get<int>()});
    }
    stream.schema.label_cardinalities = m.at("label_cardinalities").get<std::vector<int>>();

    const int k = static_cast<int>(stream.schema.num_slots());
    const int feat_count = stream.fragment_dims[0];
    const std::size_t task_count = m.at("task_count").get<std::size_t>();

    auto read_file = [&](const std::string& path, auto&& consume) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("missing dataset file: " + path);
        std::string line;
        std::getline(in, line);  // header
        std::vector<CsvRow> rows;
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            rows.push_back(parse_row(line, feat_count, k));
            if (static_cast<int>(rows.size()) == k) {
                consume(rows);
                rows.clear();
            }
        }
        if (!rows.empty()) throw std::runtime_error("dataset csv: trailing partial record in " + path);
    };

    for (std::size_t t = 1; t <= task_count; ++t) {
        Task task;
        task.id = static_cast<int>(t);
        read_file((fs::path(dir) / ("task_" + std::to_string(t) + ".csv")).string(),
                  [&](const std::vector<CsvRow>& rows) {
                      Example e;
                      int fragments = 0;
                      for (const SlotBinding& b : stream.bindings) fragments = std::max(fragments, b.fragment + 1);
                      e.fragments.resize(fragments);
                      for (const CsvRow& row : rows) e.fragments[stream.bindings[row.slot].fragment] = row.feats;
                      e.concepts = rows[0].concepts;
                      e.label = rows[0].label;
                      e.supervised = rows[0].supervised;
                      if (rows[0].split == "train")
                          task.train.push_back(std::move(e));
                      else if (rows[0].split == "val")
                          task.val.push_back(std::move(e));
                      else
                          task.test.push_back(std::move(e));
                  });
        task.label_set = m.at("task_label_sets")[t - 1].get<std::vector<std::size_t>>();
        task.slot_value_sets = m.at("task_slot_values")[t - 1].get<std::vector<std::vector<int>>>();
        stream.tasks.push_back(std::move(task));
    }
    if (m.at("has_ood").get<bool>()) {
        read_file((fs::path(dir) / "ood.csv").string(), [&](const std::vector<CsvRow>& rows) {
            Example e;
            int fragments = 0;
            for (const SlotBinding& b : stream.bindings) fragments = std::max(fragments, b.fragment + 1);
            e.fragments.resize(fragments);
            for (const CsvRow& row : rows) e.fragments[stream.bindings[row.slot].fragment] = row.feats;
            e.concepts = rows[0].concepts;
            e.label = rows[0].label;
            e.supervised = rows[0].supervised;
            stream.ood.push_back(std::move(e));
        });
    }
    return stream;
}

}  // namespace nesycl
