#pragma once

#include <filesystem>
#include <string>

namespace clawnet::node {

/// Content hash of whatever is at `p`, without following symlinks: file
/// bytes, directory entries recursively (sorted by name), or link targets.
/// Absent paths hash to the literal "absent". Modification times and
/// permissions are not part of the hash.
std::string tree_hash(const std::filesystem::path& p);

}  // namespace clawnet::node
