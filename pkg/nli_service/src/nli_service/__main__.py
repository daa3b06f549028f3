"""Entry point: run the service under uvicorn, configured from the environment."""

import uvicorn

from .app import Settings, create_app


def main() -> None:
    settings = Settings.from_env()
    uvicorn.run(create_app(settings), host="0.0.0.0", port=settings.port)


if __name__ == "__main__":
    main()
