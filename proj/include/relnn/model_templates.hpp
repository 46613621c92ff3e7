#pragma once

#include <string>

namespace relnn::cli {

// MovieLens-family gender model: Likes/Action/Drama movie aggregates plus
// `latents` numeric latent properties feed `hidden` stacked sigmoid layers;
// the output unit adds age and occupation features. hidden == 0 and
// latents == 0 gives the plain relational logistic regression.
std::string gender_model_text(int hidden, int latents, double lambda);

// Age regression over the same data: identity head, MSE loss, no MIX,
// gender and occupations as demographic features.
std::string age_model_text(int hidden, int latents);

} // namespace relnn::cli
