#pragma once

#include <array>
#include <optional>
#include <string>

#include "leafid/image.hpp"
#include "leafid/nn.hpp"
#include "leafid/pairgen.hpp"

namespace leafid {

// One Siamese similarity model: a shared embedding backbone driving both
// twins plus the weighted-L1 calibration head. Stage A is (genus, global),
// stage B is (species, local); they are distinct instances of this type.
class SiameseModel {
public:
    nn::BackboneConfig config;
    nn::BackboneParams<float> params;
    Eigen::VectorXf head_w;            // length M, kept component-wise <= 0
    float head_b = 0.0f;
    std::array<float, 3> channel_means = {0.5f, 0.5f, 0.5f};
    View view_tag = View::global;
    Grouping grouping_tag = Grouping::species;

    int embed_dim() const { return config.embed_dim; }
    int input_h() const { return config.in_h; }
    int input_w() const { return config.in_w; }

    // Content hash of the serialized model; recomputed lazily after training.
    const std::string& fingerprint() const;
    void invalidate_fingerprint() { fingerprint_.reset(); }

private:
    mutable std::optional<std::string> fingerprint_;
};

SiameseModel make_model(const std::string& backbone_id, int in_h, int in_w, View view,
                        Grouping grouping, std::uint64_t init_seed);

// Image -> normalized [3, H*W] float map: pixels scaled to [0,1] minus the
// stored per-channel training means.
nn::Mat<float> normalize_input(const SiameseModel& model, const Image& img);

Eigen::VectorXf embed(const SiameseModel& model, const Image& img);
Eigen::VectorXf embed(const SiameseModel& model, const Image& img, nn::Workspace<float>& ws);

// Component-wise |a - b|.
Eigen::VectorXf l1_vector(const Eigen::VectorXf& a, const Eigen::VectorXf& b);

// Summed L1 distance between two embeddings (diagnostic value).
double l1_scalar(const Eigen::VectorXf& a, const Eigen::VectorXf& b);

// d_w = logistic(w . |e_a - e_b| + b), computed in double, clamped to the
// open interval (0,1).
double head_similarity(const SiameseModel& model, const Eigen::VectorXf& ea,
                       const Eigen::VectorXf& eb);

double similarity(const SiameseModel& model, const Image& a, const Image& b);

// Binary cross-entropy of a similarity against the pair label.
double pair_loss(double d_w, int y);

// Binary model container, magic "SCNN". Parameters stored as little-endian
// 32-bit floats; see README for the exact layout.
void save_model(const SiameseModel& model, const std::string& path);
SiameseModel load_model(const std::string& path);
std::string model_fingerprint_of_file(const std::string& path);

}  // namespace leafid
