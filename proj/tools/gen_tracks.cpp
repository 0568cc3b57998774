// Regenerates the shipped track files under data/tracks/.

#include <cstdio>
#include <filesystem>

#include "racekit/track_shapes.hpp"

using namespace racekit;

int main(int argc, char** argv) {
  std::filesystem::path dir = argc > 1 ? argv[1] : "data/tracks";
  std::filesystem::create_directories(dir);

  TrackBlueprint stadium = stadium_blueprint(10.0, 2.5, 1.0);
  save_track((dir / "stadium.txt").string(), stadium.centerline,
             stadium.w_left, stadium.w_right);

  TrackBlueprint wavy = wavy_blueprint(9.0, 1.0);
  save_track((dir / "wavy.txt").string(), wavy.centerline, wavy.w_left,
             wavy.w_right);

  std::printf("wrote %s and %s\n", (dir / "stadium.txt").c_str(),
              (dir / "wavy.txt").c_str());
  return 0;
}
