#pragma once

#include <stdexcept>
#include <string>

namespace bootsplat {

    class ColmapError : public std::runtime_error {
    public:
        enum class Kind { TruncatedInput, UnsupportedModel, Malformed };

        ColmapError(Kind kind, const std::string& what)
            : std::runtime_error(what),
              kind_(kind) {}

        Kind kind() const noexcept { return kind_; }

    private:
        Kind kind_;
    };

    class EmptySceneError : public std::runtime_error {
    public:
        using std::runtime_error::runtime_error;
    };

    class CheckpointError : public std::runtime_error {
    public:
        using std::runtime_error::runtime_error;
    };

    class ImageIoError : public std::runtime_error {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Raised by a regenerator that could not produce an image (remote service
    /// down, bad response). The bootstrap loop catches it per batch.
    class PredictorFailure : public std::runtime_error {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Scene directory missing or inconsistent with its COLMAP model.
    class SceneError : public std::runtime_error {
    public:
        using std::runtime_error::runtime_error;
    };

    class ConfigError : public std::runtime_error {
    public:
        using std::runtime_error::runtime_error;
    };

} // namespace bootsplat
