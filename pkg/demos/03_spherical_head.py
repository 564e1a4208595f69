"""Render a click through the spherical-head model and measure the cues.

For each of the 8 azimuth slots the script reports the interaural time
difference recovered by cross-correlation and the interaural level ratio,
next to the closed-form delay the renderer was built from.

Run with:  python3 demos/03_spherical_head.py
"""
import numpy as np

from pointsound.audio import AudioClip
from pointsound.binaural import (
    azimuth_of_index,
    make_spherical_hrir_set,
    render_binaural,
    woodworth_itd,
)


def xcorr_lag(a, b):
    """Lag (in samples) at which b best matches a shifted copy of a."""
    n = len(a)
    corr = np.correlate(a, b, mode="full")
    return int(np.argmax(corr)) - (n - 1)


def main():
    rng = np.random.default_rng(11)
    for fs in (8000, 44100):
        hrirs = make_spherical_hrir_set(fs)
        burst = rng.standard_normal(fs // 2)
        clip = AudioClip(burst[None, :], fs)
        print(f"== {fs} Hz, head radius 8.75 cm ==")
        print("slot  angle      model |ITD|   measured lag   level L/R")
        for k in range(8):
            angle = azimuth_of_index(k)
            out = render_binaural(clip, k, hrirs)
            left, right = out.samples
            lag = xcorr_lag(left, right)
            predicted = round(woodworth_itd(angle) * fs)
            level = np.abs(left).mean() / np.abs(right).mean()
            print(
                f"  {k}   {np.degrees(angle):6.1f}deg   {predicted:4d} smp"
                f"      {lag:+4d} smp      {level:5.2f}"
            )
        print()
    print("The measured lag magnitude matches the closed-form delay at every")
    print("slot, and its sign flips across the midline together with the level")
    print("tilt the shadow filter adds: slots 1-3 reach the near (left) ear")
    print("first and louder, slots 5-7 mirror that, 0 and 4 stay centered.")


if __name__ == "__main__":
    main()
