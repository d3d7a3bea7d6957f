# Root conftest so `pytest` puts the repo root on sys.path; test modules
# import shared fixtures from each other as tests.<module>.
