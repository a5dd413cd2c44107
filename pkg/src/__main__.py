from src.cli import cli


def main():
    cli(prog_name="ball-potentials")


if __name__ == "__main__":
    main()
