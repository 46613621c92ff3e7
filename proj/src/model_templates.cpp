#include "relnn/model_templates.hpp"

#include <sstream>
#include <vector>

namespace relnn::cli {

namespace {

void emit_preamble(std::ostringstream& os, bool with_gender, bool with_agemid) {
    os << "population user\n";
    os << "population movie\n";
    os << "predicate Likes(user, movie) bool\n";
    os << "predicate Action(movie) bool\n";
    os << "predicate Drama(movie) bool\n";
    if (with_agemid) os << "predicate AgeMid(user) real\n";
    if (with_gender) os << "predicate Gender(user) bool\n";
    for (int k = 0; k <= 20; ++k) os << "predicate Occ" << k << "(user) bool\n";
}

// Movie-aggregate units: Likes&Action, Likes&Drama, Likes&latent_j. Either
// fed through sigmoid hidden layers or added to `direct`, the list of WFs
// the output unit takes as-is.
void emit_body(std::ostringstream& os, int hidden, int latents,
               std::vector<std::string>& direct, int& wid) {
    for (int j = 1; j <= latents; ++j) os << "latent N" << j << "(movie)\n";

    std::vector<std::string> aggregates = {"Likes(u,m) & Action(m)", "Likes(u,m) & Drama(m)"};
    for (int j = 1; j <= latents; ++j) aggregates.push_back("Likes(u,m) & N" + std::to_string(j) + "(m)");

    if (hidden == 0) {
        for (const std::string& a : aggregates) direct.push_back(a);
        return;
    }

    // Each layer's activations also feed the output unit directly; without
    // the skip edges a narrow stack of sigmoids starts with no gradient
    // signal reaching the aggregate weights.
    std::vector<std::string> current; // activation outputs feeding the next layer
    for (size_t i = 0; i < aggregates.size(); ++i) {
        std::string s = "S" + std::to_string(i + 1);
        os << "unit " << s << "(u: user): w" << wid++ << " * True\n";
        os << "    w" << wid++ << " * " << aggregates[i] << "\n";
        os << "activation H" << (i + 1) << " = sigmoid(" << s << ")\n";
        current.push_back("H" + std::to_string(i + 1) + "(u)");
    }
    for (const std::string& in : current) direct.push_back(in);
    for (int layer = 2; layer <= hidden; ++layer) {
        std::string k = "K" + std::to_string(layer);
        os << "unit " << k << "(u: user): w" << wid++ << " * True\n";
        for (const std::string& in : current) os << "    w" << wid++ << " * " << in << "\n";
        os << "activation " << k << "a = sigmoid(" << k << ")\n";
        current = {k + "a(u)"};
        direct.push_back(current[0]);
    }
}

} // namespace

std::string gender_model_text(int hidden, int latents, double lambda) {
    std::ostringstream os;
    emit_preamble(os, false, true);
    int wid = 0;
    std::vector<std::string> direct;
    emit_body(os, hidden, latents, direct, wid);

    os << "unit Out(u: user): w" << wid++ << " * True\n";
    for (const std::string& d : direct) os << "    w" << wid++ << " * " << d << "\n";
    os << "    w" << wid++ << " * AgeMid(u)\n";
    for (int k = 0; k <= 20; ++k) os << "    w" << wid++ << " * Occ" << k << "(u)\n";
    os << "mix lambda = " << lambda << "\n";
    os << "target Out sigmoid logloss labels Gender\n";
    return os.str();
}

std::string age_model_text(int hidden, int latents) {
    std::ostringstream os;
    emit_preamble(os, true, false);
    int wid = 0;
    std::vector<std::string> direct;
    emit_body(os, hidden, latents, direct, wid);

    os << "unit Out(u: user): w" << wid++ << " * True\n";
    for (const std::string& d : direct) os << "    w" << wid++ << " * " << d << "\n";
    os << "    w" << wid++ << " * Gender(u)\n";
    for (int k = 0; k <= 20; ++k) os << "    w" << wid++ << " * Occ" << k << "(u)\n";
    os << "target Out identity mse labels AgeMid\n";
    return os.str();
}

} // namespace relnn::cli
