from multiprocessing import freeze_support

if __name__ == '__main__':
    freeze_support()
    import sys
    from ldp_renewal.cli.main import main

    sys.exit(main())
