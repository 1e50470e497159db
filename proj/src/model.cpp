#include "leafid/model.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace leafid {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
    char b[4];
    b[0] = static_cast<char>(v & 0xff);
    b[1] = static_cast<char>((v >> 8) & 0xff);
    b[2] = static_cast<char>((v >> 16) & 0xff);
    b[3] = static_cast<char>((v >> 24) & 0xff);
    buf.append(b, 4);
}

void put_floats(std::string& buf, const float* data, std::size_t n) {
    // Host is little-endian on every supported target; stored verbatim.
    buf.append(reinterpret_cast<const char*>(data), n * sizeof(float));
}

std::string serialize_model(const SiameseModel& m) {
    nlohmann::json meta;
    meta["backbone_id"] = m.config.id;
    meta["channels"] = m.config.channels;
    meta["first_stride"] = m.config.first_stride;
    meta["frozen_blocks"] = m.config.frozen_blocks;
    meta["input_shape"] = {m.config.in_h, m.config.in_w, 3};
    meta["m"] = m.config.embed_dim;
    meta["view"] = to_string(m.view_tag);
    meta["grouping"] = to_string(m.grouping_tag);
    std::string meta_str = meta.dump();

    std::string buf;
    buf.append(kMagic, 4);
    put_u32(buf, kVersion);
    put_u32(buf, static_cast<std::uint32_t>(meta_str.size()));
    buf += meta_str;

    put_floats(buf, m.channel_means.data(), 3);
    for (std::size_t i = 0; i < m.params.conv_w.size(); ++i) {
        put_floats(buf, m.params.conv_w[i].data(), m.params.conv_w[i].size());
        put_floats(buf, m.params.conv_b[i].data(), m.params.conv_b[i].size());
    }
    put_floats(buf, m.params.dense_w.data(), m.params.dense_w.size());
    put_floats(buf, m.params.dense_b.data(), m.params.dense_b.size());
    put_floats(buf, m.head_w.data(), m.head_w.size());
    put_floats(buf, &m.head_b, 1);
    return buf;
}

class Reader {
public:
    Reader(const std::string& buf, const std::string& path) : buf_(buf), path_(path) {}

    void raw(void* dst, std::size_t n) {
        if (pos_ + n > buf_.size())
            throw validation_error("model file truncated: " + path_);
        std::memcpy(dst, buf_.data() + pos_, n);
        pos_ += n;
    }
    std::uint32_t u32() {
        unsigned char b[4];
        raw(b, 4);
        return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    std::string bytes(std::size_t n) {
        std::string s(n, '\0');
        raw(s.data(), n);
        return s;
    }
    void floats(float* dst, std::size_t n) { raw(dst, n * sizeof(float)); }
    bool exhausted() const { return pos_ == buf_.size(); }

private:
    const std::string& buf_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace

const std::string& SiameseModel::fingerprint() const {
    if (!fingerprint_) {
        std::string bytes = serialize_model(*this);
        fingerprint_ = to_hex(fnv1a64(bytes.data(), bytes.size()));
    }
    return *fingerprint_;
}

SiameseModel make_model(const std::string& backbone_id, int in_h, int in_w, View view,
                        Grouping grouping, std::uint64_t init_seed) {
    SiameseModel m;
    m.config = nn::backbone_config(backbone_id, in_h, in_w);
    nn::init_params(m.config, m.params, derive_seed(init_seed, 1));

    auto rng = make_rng(derive_seed(init_seed, 2));
    std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(m.config.embed_dim)));
    m.head_w.resize(m.config.embed_dim);
    // Non-positive head weights: larger L1 distance can never raise the
    // similarity, so an identical pair attains the model maximum logistic(b).
    for (int i = 0; i < m.config.embed_dim; ++i)
        m.head_w[i] = -std::abs(static_cast<float>(dist(rng)));
    m.head_b = 0.0f;
    m.view_tag = view;
    m.grouping_tag = grouping;
    return m;
}

nn::Mat<float> normalize_input(const SiameseModel& model, const Image& img) {
    img.validate();
    if (img.height != model.input_h() || img.width != model.input_w())
        throw validation_error("embed: image " + std::to_string(img.height) + "x" +
                               std::to_string(img.width) + " does not match model input " +
                               std::to_string(model.input_h()) + "x" + std::to_string(model.input_w()));
    nn::Mat<float> in(3, static_cast<Eigen::Index>(img.height) * img.width);
    const float inv = 1.0f / 255.0f;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            const auto* p = img.px(y, x);
            const Eigen::Index col = static_cast<Eigen::Index>(y) * img.width + x;
            in(0, col) = p[0] * inv - model.channel_means[0];
            in(1, col) = p[1] * inv - model.channel_means[1];
            in(2, col) = p[2] * inv - model.channel_means[2];
        }
    return in;
}

Eigen::VectorXf embed(const SiameseModel& model, const Image& img, nn::Workspace<float>& ws) {
    nn::Mat<float> in = normalize_input(model, img);
    return nn::backbone_forward(model.config, model.params, in, ws);
}

Eigen::VectorXf embed(const SiameseModel& model, const Image& img) {
    nn::Workspace<float> ws;
    return embed(model, img, ws);
}

Eigen::VectorXf l1_vector(const Eigen::VectorXf& a, const Eigen::VectorXf& b) {
    if (a.size() != b.size())
        throw validation_error("l1_vector: length mismatch (" + std::to_string(a.size()) + " vs " +
                               std::to_string(b.size()) + ")");
    return (a - b).cwiseAbs();
}

double l1_scalar(const Eigen::VectorXf& a, const Eigen::VectorXf& b) {
    return static_cast<double>(l1_vector(a, b).sum());
}

double head_similarity(const SiameseModel& model, const Eigen::VectorXf& ea,
                       const Eigen::VectorXf& eb) {
    Eigen::VectorXf v = l1_vector(ea, eb);
    if (v.size() != model.head_w.size())
        throw validation_error("head_similarity: embedding length mismatch");
    double z = static_cast<double>(model.head_b);
    for (Eigen::Index i = 0; i < v.size(); ++i)
        z += static_cast<double>(model.head_w[i]) * static_cast<double>(v[i]);
    double d = 1.0 / (1.0 + std::exp(-z));
    return std::clamp(d, 1e-15, 1.0 - 1e-15);
}

double similarity(const SiameseModel& model, const Image& a, const Image& b) {
    return head_similarity(model, embed(model, a), embed(model, b));
}

double pair_loss(double d_w, int y) {
    if (!(d_w > 0.0 && d_w < 1.0))
        throw numeric_error("pair_loss: d_w must lie in (0,1), got " + std::to_string(d_w));
    if (y != 0 && y != 1) throw usage_error("pair_loss: label must be 0 or 1");
    return -(y * std::log(d_w) + (1 - y) * std::log(1.0 - d_w));
}

void save_model(const SiameseModel& model, const std::string& path) {
    std::string bytes = serialize_model(model);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw io_error("cannot write model file: " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw io_error("short write on model file: " + path);
}

SiameseModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open model file: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    Reader r(buf, path);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw validation_error("not a model file (bad magic): " + path);
    std::uint32_t version = r.u32();
    if (version != kVersion)
        throw validation_error("unsupported model version " + std::to_string(version) + ": " + path);

    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(r.bytes(r.u32()));
    } catch (const nlohmann::json::exception& e) {
        throw validation_error("bad model metadata in " + path + ": " + e.what());
    }

    SiameseModel m;
    m.config.id = meta.at("backbone_id").get<std::string>();
    m.config.channels = meta.at("channels").get<std::vector<int>>();
    m.config.first_stride = meta.at("first_stride").get<int>();
    m.config.frozen_blocks = meta.at("frozen_blocks").get<int>();
    auto shape = meta.at("input_shape").get<std::vector<int>>();
    if (shape.size() != 3 || shape[2] != 3)
        throw validation_error("bad input_shape in model metadata: " + path);
    m.config.in_h = shape[0];
    m.config.in_w = shape[1];
    m.config.embed_dim = meta.at("m").get<int>();
    m.config.validate();
    m.view_tag = view_from_string(meta.at("view").get<std::string>());
    m.grouping_tag = grouping_from_string(meta.at("grouping").get<std::string>());

    r.floats(m.channel_means.data(), 3);
    auto shapes = m.config.block_shapes();
    m.params.conv_w.resize(shapes.size());
    m.params.conv_b.resize(shapes.size());
    for (std::size_t i = 0; i < shapes.size(); ++i) {
        m.params.conv_w[i].resize(shapes[i].out_c, shapes[i].in_c * 9);
        m.params.conv_b[i].resize(shapes[i].out_c);
        r.floats(m.params.conv_w[i].data(), m.params.conv_w[i].size());
        r.floats(m.params.conv_b[i].data(), m.params.conv_b[i].size());
    }
    m.params.dense_w.resize(m.config.embed_dim, m.config.flat_dim());
    m.params.dense_b.resize(m.config.embed_dim);
    r.floats(m.params.dense_w.data(), m.params.dense_w.size());
    r.floats(m.params.dense_b.data(), m.params.dense_b.size());
    m.head_w.resize(m.config.embed_dim);
    r.floats(m.head_w.data(), m.head_w.size());
    r.floats(&m.head_b, 1);
    if (!r.exhausted()) throw validation_error("trailing bytes in model file: " + path);
    return m;
}

std::string model_fingerprint_of_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open model file: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return to_hex(fnv1a64(buf.data(), buf.size()));
}

}  // namespace leafid
