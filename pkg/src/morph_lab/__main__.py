"""Allow running as `python -m morph_lab`."""

from morph_lab.cli import main

raise SystemExit(main())
