import pytest

from tgif.assets import AssetGenConfig, AssetLibrary, generate_assets

SR = 8000


@pytest.fixture(scope="session")
def asset_library(tmp_path_factory) -> AssetLibrary:
    """A small shared procedural corpus (8 kHz keeps tests fast)."""
    root = tmp_path_factory.mktemp("assets")
    cfg = AssetGenConfig(
        sample_rate=SR,
        utterance_s=2.5,
        utterances_per_speaker=3,
        generic_speakers=8,
        group_speakers=6,
        generic_rooms=2,
        group_rooms=2,
        rirs_per_room=2,
        noise_clips_per_domain=3,
        noise_s=2.5,
        n_groups=2,
        group_size=3,
        seed=1234,
    )
    generate_assets(root, cfg)
    return AssetLibrary(root, SR)
