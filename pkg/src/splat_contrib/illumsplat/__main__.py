from splat_contrib.illumsplat.cli.root import run

if __name__ == "__main__":
    run()
