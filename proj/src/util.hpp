#pragma once

#include "cli.hpp"

#include "binn/grid.hpp"
#include "binn/io.hpp"
#include "binn/pipeline.hpp"

namespace binn::cli {

inline GridDataset load_grid(const std::string& path) {
    try {
        return GridDataset::from_json(io::read_json(path));
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("grid file " + path + ": " + e.what());
    } catch (const Error& e) {
        throw UsageError("grid file " + path + ": " + e.what());
    }
}

inline pde::PairDataset load_dataset(const std::string& path) {
    try {
        return pde::PairDataset::load(path);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("dataset " + path + ": " + e.what());
    } catch (const Error& e) {
        throw UsageError("dataset " + path + ": " + e.what());
    }
}

inline PcaBundle load_pca(const std::string& dir) {
    try {
        return PcaBundle::load(dir);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError("pca directory " + dir + ": " + e.what());
    } catch (const Error& e) {
        throw UsageError("pca directory " + dir + ": " + e.what());
    }
}

}  // namespace binn::cli
