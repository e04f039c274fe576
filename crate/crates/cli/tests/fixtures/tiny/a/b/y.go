package b

func Helper() string {
	return "helper"
}
