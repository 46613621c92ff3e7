#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "relnn/data.hpp"
#include "relnn/graph.hpp"
#include "relnn/modelspec.hpp"
#include "relnn/schema.hpp"

namespace relnn::cli {

class CliError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A parsed, lowered, validated model ready to bind to data.
struct ModelBundle {
    modelspec::ModelDocument doc;
    Schema schema;
    LayerGraph graph;
    ParameterStore store;
};

ModelBundle load_model_text(const std::string& text, const std::string& origin = "<text>");
ModelBundle load_model_file(const std::filesystem::path& path);

// Grows latent tables to the (possibly data-enlarged) population sizes; new
// entries start at 0 until initialized or loaded.
void sync_latents(ParameterStore& store, const Schema& schema);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& content);

// Entry point behind the relnn binary. Exit codes: 0 ok, 1 runtime
// failure, 2 usage error.
int run_cli(int argc, const char* const* argv);

} // namespace relnn::cli
