#pragma once

#include <array>
#include <concepts>
#include <string>
#include <string_view>
#include <utility>

#include <nlohmann/json.hpp>

#include "cvsops/error.hpp"

namespace cvsops {

// Specialize with `static constexpr std::array values{std::pair{E::kX, "X"}, ...}`
// to get strict uppercase-string JSON serialization for an enum.
template <class E>
struct EnumNames;

template <class E>
concept NamedEnum = std::is_enum_v<E> && requires { EnumNames<E>::values; };

template <NamedEnum E>
constexpr std::string_view enum_name(E value) {
  for (const auto& [v, name] : EnumNames<E>::values) {
    if (v == value) return name;
  }
  return "?";
}

template <NamedEnum E>
E enum_from_string(std::string_view text) {
  for (const auto& [v, name] : EnumNames<E>::values) {
    if (name == text) return v;
  }
  throw Error(Errc::kInvalidInput, "unknown enum value '" + std::string(text) + "'");
}

}  // namespace cvsops

// Serializer lookup by specialization rather than ADL, so enums declared in
// nested namespaces get the string form too.
template <class E>
  requires cvsops::NamedEnum<E>
struct nlohmann::adl_serializer<E, void> {
  static void to_json(nlohmann::json& j, E value) { j = std::string(cvsops::enum_name(value)); }
  static void from_json(const nlohmann::json& j, E& value) {
    if (!j.is_string()) throw cvsops::Error(cvsops::Errc::kInvalidInput, "enum must be a string");
    value = cvsops::enum_from_string<E>(j.get_ref<const std::string&>());
  }
};
