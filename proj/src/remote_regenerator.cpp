#include "bootsplat/remote_regenerator.hpp"

#include "bootsplat/errors.hpp"
#include "bootsplat/image_io.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cmath>

namespace bootsplat {

    namespace {
        httplib::Client make_client(const ServiceConfig& cfg) {
            httplib::Client client(cfg.url);
            const auto secs = static_cast<time_t>(std::floor(cfg.timeout_seconds));
            const auto usecs = static_cast<time_t>((cfg.timeout_seconds - static_cast<double>(secs)) * 1e6);
            client.set_connection_timeout(secs, usecs);
            client.set_read_timeout(secs, usecs);
            client.set_write_timeout(secs, usecs);
            return client;
        }
    } // namespace

    RemoteRegenerator::RemoteRegenerator(ServiceConfig cfg)
        : cfg_(std::move(cfg)) {
        if (cfg_.url.empty())
            throw ConfigError("service url is empty");
        if (!(cfg_.timeout_seconds > 0.0))
            throw ConfigError("service timeout must be positive");
    }

    ImageBuffer RemoteRegenerator::regenerate(const diffusion::RegenRequest& req, const Camera&) {
        return call(req.image, req.strength, req.steps, req.seed, false);
    }

    ImageBuffer RemoteRegenerator::upscale4x(const ImageBuffer& image, const diffusion::RegenRequest& req) {
        return call(image, req.strength, req.steps, req.seed, true);
    }

    bool RemoteRegenerator::healthy() {
        auto client = make_client(cfg_);
        auto res = client.Get("/v1/health");
        return res && res->status == 200;
    }

    ImageBuffer RemoteRegenerator::call(const ImageBuffer& image, double strength, int steps, uint64_t seed, bool upscale) {
        nlohmann::json body{{"image_b64", to_b64(image)}, {"strength", strength}, {"steps", steps}, {"seed", seed}};
        if (!cfg_.prompt.empty())
            body["prompt"] = cfg_.prompt;
        if (upscale)
            body["upscale"] = true;

        auto client = make_client(cfg_);
        auto res = client.Post("/v1/regenerate", body.dump(), "application/json");
        if (!res)
            throw PredictorFailure("regeneration service unreachable at " + cfg_.url + ": " + httplib::to_string(res.error()));
        if (res->status != 200) {
            std::string detail = res->body;
            try {
                const auto j = nlohmann::json::parse(res->body);
                if (j.contains("error"))
                    detail = j["error"].dump();
            } catch (const nlohmann::json::exception&) {
            }
            throw PredictorFailure("regeneration service returned HTTP " + std::to_string(res->status) + ": " + detail);
        }

        try {
            const auto j = nlohmann::json::parse(res->body);
            ImageBuffer out = from_b64(j.at("image_b64").get<std::string>());
            if (!upscale && !out.same_shape(image))
                throw PredictorFailure("regeneration service changed the image size");
            return out;
        } catch (const nlohmann::json::exception& e) {
            throw PredictorFailure(std::string("malformed regeneration response: ") + e.what());
        } catch (const ImageIoError& e) {
            throw PredictorFailure(std::string("undecodable regeneration response: ") + e.what());
        }
    }

} // namespace bootsplat
