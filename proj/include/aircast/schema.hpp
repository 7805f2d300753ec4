#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace aircast {

enum class Period { P1Summer, P2Winter };

std::string period_name(Period p);
Period parse_period(const std::string& name);

// The canonical model input layout: 29 named features in fixed order.
// 5 wearable channels, 3 local-sensor channels, 8 air-quality channels,
// 9 weather channels, 4 cyclical time encodings.
class FeatureSchema {
public:
    struct Feature {
        std::string name;
        std::string unit;
        std::string source;
    };

    static constexpr std::size_t kCount = 29;

    static const FeatureSchema& instance();

    std::size_t size() const { return features_.size(); }
    const Feature& at(std::size_t i) const { return features_.at(i); }
    const std::vector<Feature>& features() const { return features_; }

    std::size_t index_of(std::string_view name) const;  // throws ValidationError
    bool contains(std::string_view name) const;

    // channels the wearable produces; these are the ones inpainting predicts
    const std::vector<std::size_t>& physiological_indices() const { return physiological_; }
    // pollutants a simulated exposure scenario scales by default
    const std::vector<std::size_t>& scenario_pollutant_indices() const { return scenario_; }

private:
    FeatureSchema();
    std::vector<Feature> features_;
    std::vector<std::size_t> physiological_;
    std::vector<std::size_t> scenario_;
};

}  // namespace aircast
