#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace mup {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Index of `name` in the header; throws InvalidArgument if absent.
  std::size_t column(std::string_view name) const;
};

inline constexpr std::string_view kCoordCheckHeader = "width,step,layer,rms_coord,rel_to_first";
inline constexpr std::string_view kSweepHeader = "width,lr,seed,steps,train_loss,val_loss,diverged";
inline constexpr std::string_view kProbeHeader =
    "width,layer,role,spec_w,spec_dw,target,ratio_w,ratio_dw,grad_rank,grad_fro_over_spec";

/// Plain comma-separated text with a trailing newline per row. Fields may
/// not contain commas, quotes or newlines.
std::string to_csv(const CsvTable& table);
CsvTable parse_csv(std::string_view text);

std::string read_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename, so readers never see a partial file.
void write_file(const std::filesystem::path& path, std::string_view contents);

CsvTable read_csv(const std::filesystem::path& path);
void write_csv(const std::filesystem::path& path, const CsvTable& table);

std::string header_line(const CsvTable& table);

}  // namespace mup
