#pragma once

#include "bootsplat/bootstrap.hpp"

#include <string>

namespace bootsplat {

    struct ServiceConfig {
        std::string url = "http://127.0.0.1:8765";
        double timeout_seconds = 120.0;
        std::string prompt;
    };

    /// Regenerates views through an HTTP service:
    /// POST /v1/regenerate {image_b64, strength, steps, seed, prompt?, upscale?}
    /// -> {image_b64}. Every failure on the wire is reported as
    /// PredictorFailure.
    class RemoteRegenerator final : public ViewRegenerator {
    public:
        explicit RemoteRegenerator(ServiceConfig cfg);
        ImageBuffer regenerate(const diffusion::RegenRequest& req, const Camera& view) override;
        ImageBuffer upscale4x(const ImageBuffer& image, const diffusion::RegenRequest& req) override;
        std::string name() const override { return "remote"; }

        /// GET /v1/health; true on a 200 reply.
        bool healthy();

    private:
        ImageBuffer call(const ImageBuffer& image, double strength, int steps, uint64_t seed, bool upscale);

        ServiceConfig cfg_;
    };

} // namespace bootsplat
