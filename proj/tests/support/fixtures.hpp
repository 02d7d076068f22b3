#pragma once
// Shared test fixtures.

#include <string>

#include "pecmdp/pecmdp.hpp"

namespace fixtures {

inline constexpr const char* kCoinLamp =
    "fluent Lamp takes-values {off, on}\n"
    "action Flip\n"
    "instants 0..3\n"
    "initially-one-of {({Lamp=off}, 1.0)}\n"
    "Flip causes-one-of {({Lamp=on}, 0.9), ({}, 0.1)}\n"
    "Flip performed-at 1 with-prob 0.8\n";

inline pecmdp::Domain must_parse(const std::string& source) {
    pecmdp::ParseResult r = pecmdp::parse_domain(source);
    if (!r.ok()) throw pecmdp::Error("fixture parse failed: " + r.error->to_string());
    return std::move(*r.domain);
}

inline pecmdp::Domain coin_lamp() { return must_parse(kCoinLamp); }

}  // namespace fixtures
