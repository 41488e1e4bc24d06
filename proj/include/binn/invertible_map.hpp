#pragma once

#include "binn/layers.hpp"

#include <vector>

namespace binn {

// Ordered layer sequence; forward applies layers front to back.
class InvertibleMap {
public:
    InvertibleMap() = default;
    explicit InvertibleMap(std::vector<FlowLayer> layers) : layers_(std::move(layers)) { check_chain(); }

    void push_back(FlowLayer l) {
        if (!layers_.empty() && layer_out_dim(layers_.back()) != layer_in_dim(l))
            throw DimensionError("InvertibleMap: layer dimensions do not chain");
        layers_.push_back(std::move(l));
    }
    void append(const InvertibleMap& other) {
        for (const auto& l : other.layers_) push_back(l);
    }

    std::size_t size() const { return layers_.size(); }
    bool empty() const { return layers_.empty(); }
    const FlowLayer& operator[](std::size_t i) const { return layers_[i]; }
    const std::vector<FlowLayer>& layers() const { return layers_; }

    int in_dim() const { return layers_.empty() ? -1 : layer_in_dim(layers_.front()); }
    int out_dim() const { return layers_.empty() ? -1 : layer_out_dim(layers_.back()); }

    Vec forward(const Vec& x) const {
        Vec y = x;
        for (const auto& l : layers_) y = layer_forward(l, y);
        return y;
    }

    Vec inverse(const Vec& y) const {
        Vec x = y;
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) x = layer_inverse(*it, x);
        return x;
    }

    // Chain rule through every layer.
    Mat jacobian(const Vec& x) const {
        Vec z = x;
        Mat J = Mat::Identity(x.size(), x.size());
        for (const auto& l : layers_) {
            J = layer_jacobian(l, z) * J;
            z = layer_forward(l, z);
        }
        return J;
    }

    Mat inverse_jacobian(const Vec& y) const {
        Vec z = y;
        Mat J = Mat::Identity(y.size(), y.size());
        for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
            J = layer_inverse_jacobian(*it, z) * J;
            z = layer_inverse(*it, z);
        }
        return J;
    }

    json to_json() const {
        json arr = json::array();
        for (const auto& l : layers_) arr.push_back(layer_to_json(l));
        return arr;
    }

    static InvertibleMap from_json(const json& arr) {
        InvertibleMap m;
        for (const auto& j : arr) m.push_back(layer_from_json(j));
        return m;
    }

private:
    void check_chain() const {
        for (std::size_t i = 1; i < layers_.size(); ++i)
            if (layer_out_dim(layers_[i - 1]) != layer_in_dim(layers_[i]))
                throw DimensionError("InvertibleMap: layer dimensions do not chain");
    }

    std::vector<FlowLayer> layers_;
};

}  // namespace binn
