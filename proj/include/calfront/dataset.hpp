#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "calfront/datamodel.hpp"
#include "calfront/frontops.hpp"

namespace calfront {

/// Frames, the annotations that label them, and the manifest tying the two together.
/// `manifest.records[i]` describes `frames[i]`; `annotation_of[i]` indexes `annotations`.
struct Dataset {
  std::vector<SarFrame> frames;
  std::vector<Annotation> annotations;
  DatasetManifest manifest;
  std::vector<std::size_t> annotation_of;
  std::map<std::string, Grid<std::uint8_t>> rock_masks;  // glacier id -> binary mask

  std::size_t size() const { return frames.size(); }
  const Annotation& label(std::size_t i) const { return annotations.at(annotation_of.at(i)); }

  /// Appends a frame with its label; the annotation is stored once per (glacier, date).
  void add(SarFrame frame, const Annotation& annotation, ManifestRecord record);

  /// Frame indices of one glacier, date-ascending.
  std::vector<std::size_t> glacier_frames(const std::string& glacier_id) const;
  std::vector<std::string> glacier_ids() const;

  Dataset subset(Split split) const;

  /// Label-matched frames as evaluation truth (front from the manual annotation).
  std::vector<frontops::GroundTruth> ground_truth() const;

  /// Checks record/frame/annotation consistency; throws DataError.
  void validate() const;
};

Dataset merge(const Dataset& a, const Dataset& b);

/// Writes frames/*.pfm, zones/*.png, fronts/*.png, rock/*.png and manifest.json under `root`.
void save_dataset(const Dataset& dataset, const std::filesystem::path& root);

/// Reads a dataset from a manifest written by save_dataset.
Dataset load_dataset(const std::filesystem::path& manifest_path);

}  // namespace calfront
