#include "vizbridge/engine.hpp"

#include <algorithm>
#include <cmath>

namespace vizbridge {

std::string_view to_string(SourceKind kind)
{
    switch (kind) {
    case SourceKind::reader: return "reader";
    case SourceKind::contour: return "contour";
    case SourceKind::volume_repr: return "volume_repr";
    }
    return "unknown";
}

std::optional<SourceKind> source_kind_from_string(std::string_view text)
{
    if (text == "reader")
        return SourceKind::reader;
    if (text == "contour")
        return SourceKind::contour;
    if (text == "volume_repr")
        return SourceKind::volume_repr;
    return std::nullopt;
}

json PipelineSource::to_json() const
{
    json j{{"id", id},
           {"name", name},
           {"kind", std::string(to_string(kind))},
           {"params", params},
           {"visible", visible}};
    if (parent_id)
        j["parent_id"] = *parent_id;
    else
        j["parent_id"] = nullptr;
    return j;
}

namespace {

// Piecewise-linear interpolation over (scalar, value...) points, clamped at
// the ends. Points are strictly increasing in scalar.
template <typename Point, typename Get>
double interp(const std::vector<Point>& points, double s, Get get)
{
    if (points.empty())
        return 0.0;
    if (s <= points.front().scalar)
        return get(points.front());
    if (s >= points.back().scalar)
        return get(points.back());
    for (std::size_t i = 1; i < points.size(); ++i) {
        if (s <= points[i].scalar) {
            const double t =
                (s - points[i - 1].scalar) / (points[i].scalar - points[i - 1].scalar);
            return get(points[i - 1]) + t * (get(points[i]) - get(points[i - 1]));
        }
    }
    return get(points.back());
}

} // namespace

std::array<double, 3> TransferFunction::color_at(double scalar) const
{
    return {interp(color_points, scalar, [](const ColorPoint& p) { return p.r; }),
            interp(color_points, scalar, [](const ColorPoint& p) { return p.g; }),
            interp(color_points, scalar, [](const ColorPoint& p) { return p.b; })};
}

double TransferFunction::opacity_at(double scalar) const
{
    return interp(opacity_points, scalar, [](const OpacityPoint& p) { return p.alpha; });
}

json TransferFunction::to_json() const
{
    json colors = json::array();
    for (const auto& p : color_points)
        colors.push_back({p.scalar, p.r, p.g, p.b});
    json opacities = json::array();
    for (const auto& p : opacity_points)
        opacities.push_back({p.scalar, p.alpha});
    return {{"color_points", colors}, {"opacity_points", opacities}};
}

TransferFunction TransferFunction::from_json(const json& j)
{
    TransferFunction tf;
    for (const auto& p : j.at("color_points"))
        tf.color_points.push_back({p.at(0).get<double>(), p.at(1).get<double>(),
                                   p.at(2).get<double>(), p.at(3).get<double>()});
    for (const auto& p : j.at("opacity_points"))
        tf.opacity_points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return tf;
}

void validate_transfer_function(const TransferFunction& tf, const ScalarRange& range)
{
    const double span = range.hi - range.lo;
    const double slack = 0.01 * span;

    auto check_scalar = [&](const char* list, std::size_t i, double prev, double s) {
        if (!std::isfinite(s))
            throw EngineError(std::string(list) + " point " + std::to_string(i) +
                              ": scalar is not finite");
        if (i > 0 && s <= prev)
            throw EngineError(std::string(list) + " point " + std::to_string(i) +
                              ": scalar " + format_double(s) +
                              " is not strictly increasing");
        if (s < range.lo - slack || s > range.hi + slack)
            throw EngineError(std::string(list) + " point " + std::to_string(i) + ": scalar " +
                              format_double(s) + " outside scalar range [" +
                              format_double(range.lo) + ", " + format_double(range.hi) + "]");
    };
    auto check_channel = [&](const char* list, std::size_t i, const char* channel, double v) {
        if (!std::isfinite(v) || v < 0.0 || v > 1.0)
            throw EngineError(std::string(list) + " point " + std::to_string(i) + ": " + channel +
                              "=" + format_double(v) + " outside [0, 1]");
    };

    if (tf.color_points.size() < 2)
        throw EngineError("transfer function needs at least two color points");
    if (tf.opacity_points.size() < 2)
        throw EngineError("transfer function needs at least two opacity points");

    double prev = 0.0;
    for (std::size_t i = 0; i < tf.color_points.size(); ++i) {
        const auto& p = tf.color_points[i];
        check_scalar("color", i, prev, p.scalar);
        check_channel("color", i, "r", p.r);
        check_channel("color", i, "g", p.g);
        check_channel("color", i, "b", p.b);
        prev = p.scalar;
    }
    prev = 0.0;
    for (std::size_t i = 0; i < tf.opacity_points.size(); ++i) {
        const auto& p = tf.opacity_points[i];
        check_scalar("opacity", i, prev, p.scalar);
        check_channel("opacity", i, "alpha", p.alpha);
        prev = p.scalar;
    }
}

TransferFunction default_transfer_function(const ScalarRange& range)
{
    TransferFunction tf;
    tf.color_points = {{range.lo, 0.0, 0.0, 1.0}, {range.hi, 1.0, 0.0, 0.0}};
    tf.opacity_points = {{range.lo, 0.0}, {range.hi, 1.0}};
    return tf;
}

} // namespace vizbridge
