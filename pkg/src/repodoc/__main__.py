from repodoc.cli import main

raise SystemExit(main())
