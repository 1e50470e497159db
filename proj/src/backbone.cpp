#include "leafid/nn.hpp"

namespace leafid::nn {

void BackboneConfig::validate() const {
    if (in_h < 8 || in_w < 8) throw usage_error("backbone input must be at least 8x8");
    if (channels.empty()) throw usage_error("backbone needs at least one conv block");
    if (embed_dim < 1) throw usage_error("backbone embed_dim must be >= 1");
    if (first_stride != 1 && first_stride != 2) throw usage_error("first_stride must be 1 or 2");
    if (frozen_blocks < 0 || frozen_blocks > static_cast<int>(channels.size()))
        throw usage_error("frozen_blocks out of range");
    auto shapes = block_shapes();
    for (const auto& s : shapes)
        if (s.out_h < 1 || s.out_w < 1)
            throw usage_error("backbone input too small for the block stack");
}

std::vector<BackboneConfig::BlockShape> BackboneConfig::block_shapes() const {
    std::vector<BlockShape> shapes;
    int c = 3, h = in_h, w = in_w;
    for (std::size_t i = 0; i < channels.size(); ++i) {
        const int stride = (i == 0) ? first_stride : 1;
        BlockShape s;
        s.in_c = c;
        s.in_h = h;
        s.in_w = w;
        s.out_c = channels[i];
        s.conv_h = (h - 1) / stride + 1;  // 3x3 conv, pad 1
        s.conv_w = (w - 1) / stride + 1;
        s.out_h = s.conv_h / 2;           // 2x2 max pool, stride 2
        s.out_w = s.conv_w / 2;
        shapes.push_back(s);
        c = channels[i];
        h = s.out_h;
        w = s.out_w;
    }
    return shapes;
}

int BackboneConfig::flat_dim() const {
    auto shapes = block_shapes();
    const auto& last = shapes.back();
    return last.out_c * last.out_h * last.out_w;
}

BackboneConfig backbone_config(const std::string& id, int in_h, int in_w) {
    BackboneConfig cfg;
    cfg.id = id;
    cfg.in_h = in_h;
    cfg.in_w = in_w;
    if (id == "small4") {
        cfg.channels = {8, 16, 32, 64};
        cfg.first_stride = std::min(in_h, in_w) >= 128 ? 2 : 1;
        cfg.embed_dim = 256;
    } else if (id == "tiny2") {
        cfg.channels = {4, 8};
        cfg.first_stride = 1;
        cfg.embed_dim = 16;
    } else {
        throw usage_error("unknown backbone_id '" + id + "' (known: small4, tiny2)");
    }
    cfg.validate();
    return cfg;
}

bool is_known_backbone(const std::string& id) { return id == "small4" || id == "tiny2"; }

}  // namespace leafid::nn
